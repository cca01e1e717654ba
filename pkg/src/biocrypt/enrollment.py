"""Face enrollment, template matching and biometric key formation."""

from __future__ import annotations

import hashlib
import math
import struct
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .detector import DEFAULT_NMS_IOU, DEFAULT_THRESHOLD, Detection, PegasosSVM, detect_faces
from .exceptions import (
    BlankEncodingError,
    DimensionMismatchError,
    DuplicateUserError,
    MultipleFacesError,
    NoFaceError,
    StoreFormatError,
    UnknownUserError,
)
from .hog import DESCRIPTOR_LENGTH, hog_descriptor
from .imagecore import WINDOW, GrayImage, resize_bilinear

KEY_LENGTH = 32
KEY_DIGITS = 9
DEFAULT_AUTH_THRESHOLD = 0.85
MAX_USERNAME_BYTES = 64


@dataclass(frozen=True, eq=False)
class FaceTemplate:
    username: str
    encoding: np.ndarray = field(repr=False)
    enrolled_at: int = 0

    def __post_init__(self):
        raw = self.username.encode("utf-8")
        if not raw or len(raw) > MAX_USERNAME_BYTES:
            raise ValueError(f"username must be 1..{MAX_USERNAME_BYTES} UTF-8 bytes")
        enc = np.array(self.encoding, dtype=np.float64)
        if enc.shape != (DESCRIPTOR_LENGTH,):
            raise DimensionMismatchError(
                f"encoding must have {DESCRIPTOR_LENGTH} components, got {enc.shape}"
            )
        if not np.any(enc):
            raise BlankEncodingError("encoding is all zero (blank face window)")
        enc.setflags(write=False)
        object.__setattr__(self, "encoding", enc)

    def __eq__(self, other):
        if not isinstance(other, FaceTemplate):
            return NotImplemented
        return (self.username == other.username and self.enrolled_at == other.enrolled_at
                and self.encoding.tobytes() == other.encoding.tobytes())


@dataclass
class TemplateStore:
    templates: Dict[str, FaceTemplate] = field(default_factory=dict)
    version: int = 1

    def __contains__(self, username):
        return username in self.templates

    def __len__(self):
        return len(self.templates)

    def get(self, username: str) -> FaceTemplate:
        try:
            return self.templates[username]
        except KeyError:
            raise UnknownUserError(f"no template enrolled for {username!r}") from None

    def add(self, template: FaceTemplate) -> None:
        if template.username in self.templates:
            raise DuplicateUserError(f"user {template.username!r} is already enrolled")
        self.templates[template.username] = template


@dataclass(frozen=True)
class AuthDecision:
    matched: bool
    similarity: float
    threshold: float


# ---------------------------------------------------------------------------
# pipeline


def face_encoding(img: GrayImage, model: PegasosSVM, detect_threshold: float = DEFAULT_THRESHOLD,
                  nms_iou: float = DEFAULT_NMS_IOU):
    """Detect the single face in ``img`` and return ``(encoding, detection)``."""
    dets = detect_faces(img, model, detect_threshold, nms_iou)
    if not dets:
        raise NoFaceError("no face detected")
    if len(dets) > 1:
        raise MultipleFacesError(f"{len(dets)} faces detected, expected exactly one")
    box: Detection = dets[0]
    crop = img.crop(box.x, box.y, box.side, box.side)
    return hog_descriptor(resize_bilinear(crop, WINDOW, WINDOW)), box


def enroll(store: TemplateStore, username: str, img: GrayImage, model: PegasosSVM,
           detect_threshold: float = DEFAULT_THRESHOLD, nms_iou: float = DEFAULT_NMS_IOU,
           now: Optional[int] = None) -> FaceTemplate:
    if username in store:
        raise DuplicateUserError(f"user {username!r} is already enrolled")
    encoding, _ = face_encoding(img, model, detect_threshold, nms_iou)
    template = FaceTemplate(username, encoding, int(time.time()) if now is None else int(now))
    store.add(template)
    return template


def similarity(a, b) -> float:
    """Cosine similarity, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"length mismatch {a.shape} vs {b.shape}")
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise BlankEncodingError("cosine similarity undefined for a zero vector")
    return max(-1.0, min(1.0, float(a @ b) / (na * nb)))


def authenticate(store: TemplateStore, username: str, img: GrayImage, model: PegasosSVM,
                 threshold: float = DEFAULT_AUTH_THRESHOLD,
                 detect_threshold: float = DEFAULT_THRESHOLD,
                 nms_iou: float = DEFAULT_NMS_IOU) -> AuthDecision:
    template = store.get(username)
    live, _ = face_encoding(img, model, detect_threshold, nms_iou)
    sim = similarity(live, template.encoding)
    return AuthDecision(matched=sim >= threshold, similarity=sim, threshold=threshold)


def render_encoding(encoding) -> str:
    """Concatenate fixed-point renderings (9 fractional digits) of every component."""
    return "".join(format(float(v), f".{KEY_DIGITS}f") for v in encoding)


def derive_key(template: FaceTemplate, hardened: bool = False) -> bytes:
    """Form a 32-byte AES key from the stored encoding.

    Components are rendered as ``%.9f`` strings (correctly rounded, so the
    result is identical on every IEEE-754 platform), concatenated, and the
    first 32 characters become the key bytes. Every rendering is at least 11
    characters long, so only the first three components contribute.

    The key alphabet is ``0-9 . -``, which leaves far fewer than 256 bits of
    entropy. ``hardened=True`` instead hashes the full rendering with
    SHA-256; keys produced that way are not interchangeable with the default.
    """
    text = render_encoding(template.encoding)
    if hardened:
        return hashlib.sha256(text.encode("ascii")).digest()
    if len(text) < KEY_LENGTH:
        raise ValueError(f"rendered encoding has {len(text)} characters, need {KEY_LENGTH}")
    return text[:KEY_LENGTH].encode("ascii")


# ---------------------------------------------------------------------------
# store file: "BCRY" | u16 version | u32 count | records, each:
#   u16 name_len | utf-8 name | u64 enrolled_at | u32 enc_len | f64[enc_len]

STORE_MAGIC = b"BCRY"
STORE_VERSION = 1


def dump_store(store: TemplateStore) -> bytes:
    parts = [STORE_MAGIC, struct.pack("<HI", STORE_VERSION, len(store.templates))]
    for t in store.templates.values():
        name = t.username.encode("utf-8")
        enc = np.asarray(t.encoding, dtype="<f8")
        parts.append(struct.pack("<H", len(name)))
        parts.append(name)
        parts.append(struct.pack("<QI", t.enrolled_at, enc.shape[0]))
        parts.append(enc.tobytes())
    return b"".join(parts)


def load_store(raw: bytes) -> TemplateStore:
    raw = bytes(raw)
    if raw[:4] != STORE_MAGIC:
        raise StoreFormatError(f"bad store magic {raw[:4]!r}")

    def take(fmt, pos):
        size = struct.calcsize(fmt)
        if pos + size > len(raw):
            raise StoreFormatError("truncated store record")
        return struct.unpack_from(fmt, raw, pos), pos + size

    (version, count), pos = take("<HI", 4)
    if version != STORE_VERSION:
        raise StoreFormatError(f"unsupported store version {version}")
    store = TemplateStore(version=version)
    for _ in range(count):
        (nlen,), pos = take("<H", pos)
        if pos + nlen > len(raw):
            raise StoreFormatError("truncated store record")
        try:
            name = raw[pos:pos + nlen].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StoreFormatError(f"username is not valid UTF-8: {exc}") from exc
        pos += nlen
        (enrolled_at, elen), pos = take("<QI", pos)
        if pos + 8 * elen > len(raw):
            raise StoreFormatError("truncated store record")
        enc = np.frombuffer(raw, dtype="<f8", count=elen, offset=pos).astype(np.float64)
        pos += 8 * elen
        try:
            store.add(FaceTemplate(name, enc, enrolled_at))
        except (DuplicateUserError, DimensionMismatchError, BlankEncodingError, ValueError) as exc:
            raise StoreFormatError(f"invalid record for {name!r}: {exc}") from exc
    if pos != len(raw):
        raise StoreFormatError(f"{len(raw) - pos} trailing bytes after last record")
    return store


def save_store(store: TemplateStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_store(store))


def read_store(path) -> TemplateStore:
    with open(path, "rb") as fh:
        return load_store(fh.read())
