"""Face-derived AES-256-CBC file encryption with HOG/SVM detection and cipher metrics."""

from .cipher import CipherEnvelope, decrypt, encrypt, encrypt_with_iv, pad_null
from .detector import Detection, FaceDetector, PegasosSVM, detect_faces, iou, nms, score, train_svm
from .enrollment import (
    AuthDecision,
    FaceTemplate,
    TemplateStore,
    authenticate,
    derive_key,
    enroll,
    similarity,
)
from .hog import HOGTransformer, hog_descriptor
from .imagecore import GrayImage, build_pyramid, load_pgm, resize_bilinear, to_grayscale
from .metrics import (
    MetricsReport,
    PerturbationSpec,
    analyze_file,
    avalanche_percent,
    bit_correlation,
    normalized_hamming,
    perturb_bytes,
    shannon_entropy,
)

__version__ = "0.1.0"
