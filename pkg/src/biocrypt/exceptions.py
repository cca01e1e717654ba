"""Exception hierarchy. Every error subclasses ``BiocryptError`` and ``ValueError``."""


class BiocryptError(ValueError):
    pass


class ImageFormatError(BiocryptError):
    """Malformed or unsupported image bytes."""


class ImageSizeError(BiocryptError):
    """Image dimensions invalid for the requested operation."""


class DimensionMismatchError(BiocryptError):
    pass


class TrainingDataError(BiocryptError):
    """Empty, single-class or inconsistent training set."""


class ModelFormatError(BiocryptError):
    pass


class FaceCountError(BiocryptError):
    pass


class NoFaceError(FaceCountError):
    pass


class MultipleFacesError(FaceCountError):
    pass


class DuplicateUserError(BiocryptError):
    pass


class UnknownUserError(BiocryptError):
    pass


class BlankEncodingError(BiocryptError):
    pass


class StoreFormatError(BiocryptError):
    pass


class KeyLengthError(BiocryptError):
    pass


class EnvelopeError(BiocryptError):
    """Ciphertext envelope too short or not block aligned."""


class ZeroVarianceError(BiocryptError):
    pass
