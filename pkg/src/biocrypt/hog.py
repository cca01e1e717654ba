"""Histogram of Oriented Gradients for 64x64 grayscale windows.

Configuration is fixed: centred [-1, 0, 1] gradients with edge replication,
8x8-pixel cells, 9 unsigned orientation bins centred at 10, 30, ..., 170
degrees with linear vote splitting between the two nearest bins, 2x2-cell
blocks at a stride of one cell, L2-Hys normalisation (clip 0.2, eps 1e-5).
A 64x64 window yields ``7 * 7 * 36 = 1764`` values.

All array routines work on a leading batch axis so a sliding-window scan can
describe every window of a pyramid level in one call; the single-window
functions are thin wrappers over the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .exceptions import ImageSizeError
from .imagecore import WINDOW, GrayImage

CELL_SIZE = 8
N_BINS = 9
BIN_WIDTH = 180.0 / N_BINS
BLOCK_CELLS = 2
CLIP = 0.2
EPS = 1e-5


def descriptor_length(width: int = WINDOW, height: int = WINDOW, cell_size: int = CELL_SIZE) -> int:
    cx, cy = width // cell_size, height // cell_size
    return (cx - BLOCK_CELLS + 1) * (cy - BLOCK_CELLS + 1) * BLOCK_CELLS * BLOCK_CELLS * N_BINS


DESCRIPTOR_LENGTH = descriptor_length()


@dataclass(frozen=True)
class GradientField:
    magnitude: np.ndarray
    orientation: np.ndarray  # degrees, unsigned, in [0, 180)

    @property
    def height(self) -> int:
        return self.magnitude.shape[-2]

    @property
    def width(self) -> int:
        return self.magnitude.shape[-1]


@dataclass(frozen=True)
class CellGrid:
    histograms: np.ndarray  # (..., cells_y, cells_x, N_BINS)

    @property
    def cells_y(self) -> int:
        return self.histograms.shape[-3]

    @property
    def cells_x(self) -> int:
        return self.histograms.shape[-2]


def _as_pixels(img) -> np.ndarray:
    if isinstance(img, GrayImage):
        return img.pixels.astype(np.float64)
    return np.asarray(img, dtype=np.float64)


def _gradients(px: np.ndarray):
    padded = np.pad(px, [(0, 0)] * (px.ndim - 2) + [(1, 1), (1, 1)], mode="edge")
    gx = padded[..., 1:-1, 2:] - padded[..., 1:-1, :-2]
    gy = padded[..., 2:, 1:-1] - padded[..., :-2, 1:-1]
    mag = np.sqrt(gx * gx + gy * gy)
    ang = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    ang[ang >= 180.0] = 0.0  # mod can round tiny negatives up to exactly 180
    return mag, ang


def compute_gradients(img) -> GradientField:
    px = _as_pixels(img)
    if px.shape[-1] < 3 or px.shape[-2] < 3:
        raise ImageSizeError(f"gradient computation needs at least 3x3 pixels, got {px.shape}")
    mag, ang = _gradients(px)
    return GradientField(mag, ang)


def _cell_histograms(mag, ang, cell_size):
    h, w = mag.shape[-2:]
    pos = ang / BIN_WIDTH - 0.5
    lo = np.floor(pos)
    frac = pos - lo
    lo_bin = lo.astype(np.intp) % N_BINS
    hi_bin = (lo_bin + 1) % N_BINS
    w_lo = mag * (1.0 - frac)
    w_hi = mag * frac

    lead = mag.shape[:-2]
    cy, cx = h // cell_size, w // cell_size
    hist = np.empty(lead + (cy, cx, N_BINS))
    for b in range(N_BINS):
        votes = np.where(lo_bin == b, w_lo, 0.0) + np.where(hi_bin == b, w_hi, 0.0)
        votes = votes.reshape(lead + (cy, cell_size, cx, cell_size))
        hist[..., b] = votes.sum(axis=(-3, -1))
    return hist


def cell_histograms(field: GradientField, cell_size: int = CELL_SIZE) -> CellGrid:
    """Accumulate magnitude-weighted orientation votes per ``cell_size`` square cell."""
    if field.height % cell_size or field.width % cell_size:
        raise ImageSizeError(
            f"field {field.width}x{field.height} is not divisible by cell size {cell_size}"
        )
    return CellGrid(_cell_histograms(field.magnitude, field.orientation, cell_size))


def _l2(v):
    return v / np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + EPS * EPS)


def block_normalize(grid: CellGrid) -> np.ndarray:
    hist = grid.histograms
    cy, cx = hist.shape[-3], hist.shape[-2]
    if cy < BLOCK_CELLS or cx < BLOCK_CELLS:
        raise ImageSizeError(f"need at least {BLOCK_CELLS}x{BLOCK_CELLS} cells, got {cx}x{cy}")
    by, bx = cy - BLOCK_CELLS + 1, cx - BLOCK_CELLS + 1
    # block (i, j) holds cells (i, j), (i, j+1), (i+1, j), (i+1, j+1) in row-major order
    parts = [
        hist[..., di:di + by, dj:dj + bx, :]
        for di in range(BLOCK_CELLS)
        for dj in range(BLOCK_CELLS)
    ]
    blocks = np.concatenate(parts, axis=-1)
    blocks = _l2(np.minimum(_l2(blocks), CLIP))
    return blocks.reshape(hist.shape[:-3] + (-1,))


def hog_batch(windows) -> np.ndarray:
    """Describe a stack of 64x64 windows, shape ``(n, 64, 64)`` -> ``(n, 1764)``."""
    px = np.asarray(windows, dtype=np.float64)
    if px.ndim != 3 or px.shape[1:] != (WINDOW, WINDOW):
        raise ImageSizeError(f"expected windows of shape (n, {WINDOW}, {WINDOW}), got {px.shape}")
    mag, ang = _gradients(px)
    grid = CellGrid(_cell_histograms(mag, ang, CELL_SIZE))
    return block_normalize(grid)


def hog_descriptor(window) -> np.ndarray:
    px = _as_pixels(window)
    if px.shape != (WINDOW, WINDOW):
        raise ImageSizeError(f"window must be {WINDOW}x{WINDOW}, got {px.shape[::-1]}")
    return hog_batch(px[None])[0]


class HOGTransformer(TransformerMixin, BaseEstimator):
    """Map 64x64 windows to HOG descriptors.

    Accepts an ``(n, 64, 64)`` array, an ``(n, 4096)`` array of flattened
    windows, or a sequence of :class:`GrayImage`. Stateless, so ``fit`` only
    records the input width.
    """

    def fit(self, X, y=None):
        self.n_features_in_ = WINDOW * WINDOW
        return self

    def transform(self, X):
        return hog_batch(_windows_array(X))


def _windows_array(X) -> np.ndarray:
    if isinstance(X, GrayImage):
        X = [X]
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], GrayImage):
        X = np.stack([g.pixels for g in X])
    arr = check_array(X, allow_nd=True, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == WINDOW * WINDOW:
        arr = arr.reshape(-1, WINDOW, WINDOW)
    if arr.ndim != 3 or arr.shape[1:] != (WINDOW, WINDOW):
        raise ImageSizeError(f"cannot interpret input of shape {arr.shape} as {WINDOW}x{WINDOW} windows")
    return arr
