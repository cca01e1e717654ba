"""Linear SVM window classifier and sliding-window face detection."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import (
    DimensionMismatchError,
    ImageSizeError,
    ModelFormatError,
    TrainingDataError,
)
from .hog import HOGTransformer, hog_batch
from .imagecore import DEFAULT_SCALE, WINDOW, GrayImage, build_pyramid

DEFAULT_STRIDE = 8
DEFAULT_THRESHOLD = 0.0
DEFAULT_NMS_IOU = 0.3


class PegasosSVM(ClassifierMixin, BaseEstimator):
    """Linear SVM trained by seeded Pegasos stochastic subgradient descent.

    Minimises ``lam/2 * (|w|^2 + b^2) + mean(max(0, 1 - y (w.x + b)))`` with
    step size ``1 / (lam * t)``. The bias is handled as the weight of a
    constant feature, so it is regularised together with ``w``. Each epoch
    visits every sample once in an order drawn from ``numpy.random.default_rng(seed)``.
    The returned weights are the mean of the second half of the iterates;
    the early iterates are huge (step ``1/lam`` at ``t = 1``) and would
    dominate a full average.

    ``loss_curve_`` holds the objective of the running average at the end of
    each epoch once averaging has started.

    Labels must be +1 / -1.
    """

    def __init__(self, lam: float = 1e-3, epochs: int = 30, seed: int = 0):
        self.lam = lam
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y):
        if len(X) == 0:
            raise TrainingDataError("empty training set")
        try:
            X, y = check_X_y(X, y, dtype=np.float64)
        except ValueError as exc:
            raise TrainingDataError(str(exc)) from exc
        y = np.asarray(y, dtype=np.float64)
        if not np.all((y == 1) | (y == -1)):
            raise TrainingDataError("labels must be +1 or -1")
        if np.all(y == y[0]):
            raise TrainingDataError("training set contains a single class")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")

        n, d = X.shape
        Xa = np.hstack([X, np.ones((n, 1))])
        rng = np.random.default_rng(self.seed)
        w = np.zeros(d + 1)
        w_sum = np.zeros(d + 1)
        total = self.epochs * n
        start = total // 2  # average only the second half of the iterates
        t = 0
        self.loss_curve_ = []
        for _ in range(self.epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (self.lam * t)
                margin = y[i] * (w @ Xa[i])
                w *= 1.0 - eta * self.lam
                if margin < 1.0:
                    w += (eta * y[i]) * Xa[i]
                if t > start:
                    w_sum += w
            if t > start:
                self.loss_curve_.append(_objective(w_sum / (t - start), Xa, y, self.lam))

        avg = w_sum / (total - start)
        self.coef_ = avg[:d]
        self.intercept_ = float(avg[d])
        self.classes_ = np.array([-1, 1])
        self.n_features_in_ = d
        self.n_iter_ = t
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.coef_.shape[0]:
            raise DimensionMismatchError(
                f"expected {self.coef_.shape[0]} features, got {X.shape[1]}"
            )
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, 1, -1)


def _objective(w, Xa, y, lam):
    hinge = np.maximum(0.0, 1.0 - y * (Xa @ w))
    return 0.5 * lam * float(w @ w) + float(hinge.mean())


def train_svm(samples, labels, lam: float = 1e-3, epochs: int = 30, seed: int = 0) -> PegasosSVM:
    return PegasosSVM(lam=lam, epochs=epochs, seed=seed).fit(samples, labels)


def score(model: PegasosSVM, d) -> float:
    """Raw SVM confidence ``w.d + b`` for one descriptor."""
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 1 or d.shape[0] != model.coef_.shape[0]:
        raise DimensionMismatchError(
            f"descriptor length {d.shape} does not match model dimension {model.coef_.shape[0]}"
        )
    return float(d @ model.coef_ + model.intercept_)


# ---------------------------------------------------------------------------
# model file: "BSVM" | u16 version | u32 dim | f64[dim] weights | f64 bias
#             | f64 lambda | u32 epochs | u64 seed      (all little-endian)

MODEL_MAGIC = b"BSVM"
MODEL_VERSION = 1


def dump_model(model: PegasosSVM) -> bytes:
    check_is_fitted(model, "coef_")
    w = np.asarray(model.coef_, dtype="<f8")
    return b"".join([
        MODEL_MAGIC,
        struct.pack("<HI", MODEL_VERSION, w.shape[0]),
        w.tobytes(),
        struct.pack("<ddIQ", model.intercept_, model.lam, model.epochs, model.seed & 0xFFFFFFFFFFFFFFFF),
    ])


def load_model(raw: bytes) -> PegasosSVM:
    raw = bytes(raw)
    if raw[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"bad model magic {raw[:4]!r}")
    if len(raw) < 10:
        raise ModelFormatError("truncated model header")
    version, dim = struct.unpack_from("<HI", raw, 4)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    expected = 10 + 8 * dim + struct.calcsize("<ddIQ")
    if len(raw) != expected:
        raise ModelFormatError(f"model file has {len(raw)} bytes, expected {expected}")
    w = np.frombuffer(raw, dtype="<f8", count=dim, offset=10).astype(np.float64)
    bias, lam, epochs, seed = struct.unpack_from("<ddIQ", raw, 10 + 8 * dim)
    model = PegasosSVM(lam=lam, epochs=epochs, seed=seed)
    model.coef_ = w
    model.intercept_ = bias
    model.classes_ = np.array([-1, 1])
    model.n_features_in_ = dim
    return model


def save_model(model: PegasosSVM, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_model(model))


def read_model(path) -> PegasosSVM:
    with open(path, "rb") as fh:
        return load_model(fh.read())


# ---------------------------------------------------------------------------
# boxes


@dataclass(frozen=True)
class Detection:
    x: int
    y: int
    side: int
    score: float


def iou(a: Detection, b: Detection) -> float:
    ix = max(0, min(a.x + a.side, b.x + b.side) - max(a.x, b.x))
    iy = max(0, min(a.y + a.side, b.y + b.side) - max(a.y, b.y))
    inter = ix * iy
    union = a.side * a.side + b.side * b.side - inter
    return inter / union if union > 0 else 0.0


def nms(dets: Sequence[Detection], iou_threshold: float = DEFAULT_NMS_IOU) -> List[Detection]:
    """Greedy non-maximum suppression.

    Candidates are visited by descending score, ties broken by smaller
    ``(y, x)``; a box is kept when its IoU with every box kept so far is at
    most ``iou_threshold``.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    kept: List[Detection] = []
    for d in sorted(dets, key=lambda d: (-d.score, d.y, d.x, d.side)):
        if all(iou(d, k) <= iou_threshold for k in kept):
            kept.append(d)
    return kept


# ---------------------------------------------------------------------------
# sliding window


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


def _level_windows(pixels: np.ndarray, stride: int):
    h, w = pixels.shape
    ys = range(0, h - WINDOW + 1, stride)
    xs = range(0, w - WINDOW + 1, stride)
    coords = [(x, y) for y in ys for x in xs]
    view = np.lib.stride_tricks.sliding_window_view(pixels, (WINDOW, WINDOW))
    windows = np.stack([view[y, x] for x, y in coords])
    return coords, windows


def scan(img: GrayImage, model: PegasosSVM, scale_factor: float = DEFAULT_SCALE,
         stride: int = DEFAULT_STRIDE) -> List[Detection]:
    """Score every window of every pyramid level; boxes are in level-0 coordinates."""
    out: List[Detection] = []
    for k, level in enumerate(build_pyramid(img, scale_factor)):
        coords, windows = _level_windows(level.pixels, stride)
        scores = model.decision_function(hog_batch(windows))
        s = scale_factor ** k
        side = min(_round(WINDOW * s), img.width, img.height)
        for (x, y), sc in zip(coords, scores):
            bx = min(_round(x * s), img.width - side)
            by = min(_round(y * s), img.height - side)
            out.append(Detection(bx, by, side, float(sc)))
    return out


def detect_faces(img: GrayImage, model: PegasosSVM, threshold: float = DEFAULT_THRESHOLD,
                 iou_threshold: float = DEFAULT_NMS_IOU, scale_factor: float = DEFAULT_SCALE,
                 stride: int = DEFAULT_STRIDE) -> List[Detection]:
    if img.width < WINDOW or img.height < WINDOW:
        raise ImageSizeError(f"image {img.width}x{img.height} is smaller than {WINDOW}x{WINDOW}")
    candidates = [d for d in scan(img, model, scale_factor, stride) if d.score > threshold]
    return nms(candidates, iou_threshold)


class FaceDetector(ClassifierMixin, BaseEstimator):
    """HOG + linear SVM window classifier with a sliding-window ``detect`` method.

    ``fit``/``predict``/``decision_function`` operate on 64x64 windows (see
    :class:`~biocrypt.hog.HOGTransformer` for accepted shapes); ``detect``
    runs the pyramid scan and NMS over a whole image.
    """

    def __init__(self, lam=1e-3, epochs=30, seed=0, threshold=DEFAULT_THRESHOLD,
                 iou_threshold=DEFAULT_NMS_IOU, scale_factor=DEFAULT_SCALE, stride=DEFAULT_STRIDE):
        self.lam = lam
        self.epochs = epochs
        self.seed = seed
        self.threshold = threshold
        self.iou_threshold = iou_threshold
        self.scale_factor = scale_factor
        self.stride = stride

    def fit(self, X, y):
        feats = HOGTransformer().fit_transform(X)
        self.svm_ = PegasosSVM(self.lam, self.epochs, self.seed).fit(feats, y)
        self.classes_ = self.svm_.classes_
        return self

    def decision_function(self, X):
        check_is_fitted(self, "svm_")
        return self.svm_.decision_function(HOGTransformer().transform(X))

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, 1, -1)

    def detect(self, img: GrayImage) -> List[Detection]:
        check_is_fitted(self, "svm_")
        return detect_faces(img, self.svm_, self.threshold, self.iou_threshold,
                            self.scale_factor, self.stride)

