"""Grayscale image handling: PGM I/O, RGB conversion, bilinear resize and scale pyramids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .exceptions import ImageFormatError, ImageSizeError

WINDOW = 64
DEFAULT_SCALE = 1.25


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit single-channel raster stored as a read-only ``(height, width)`` uint8 array."""

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ImageSizeError(f"image dimensions must be positive, got {self.width}x{self.height}")
        px = np.asarray(self.pixels)
        if px.size != self.width * self.height:
            raise ImageSizeError(
                f"pixel count {px.size} does not match {self.width}x{self.height}"
            )
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ImageFormatError("intensity values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.array(px.reshape(self.height, self.width), dtype=np.uint8, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, array) -> "GrayImage":
        arr = np.asarray(array)
        if arr.ndim != 2:
            raise ImageSizeError(f"expected a 2-D array, got shape {arr.shape}")
        if np.issubdtype(arr.dtype, np.floating):
            arr = np.floor(np.clip(arr, 0, 255) + 0.5)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr)

    @property
    def shape(self):
        return self.pixels.shape

    def crop(self, x: int, y: int, w: int, h: int) -> "GrayImage":
        if x < 0 or y < 0 or x + w > self.width or y + h > self.height:
            raise ImageSizeError(f"crop ({x},{y},{w},{h}) exceeds {self.width}x{self.height}")
        return GrayImage.from_array(self.pixels[y:y + h, x:x + w])

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.width, self.height, self.pixels.tobytes()))


@dataclass(frozen=True)
class Pyramid:
    levels: List[GrayImage]
    scale_factor: float

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


# ---------------------------------------------------------------------------
# PGM (P5) I/O


def _read_token(raw: bytes, pos: int):
    n = len(raw)
    while pos < n:
        c = raw[pos:pos + 1]
        if c == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ImageFormatError("truncated PGM header")
    return raw[start:pos], pos


def load_pgm(raw: bytes) -> GrayImage:
    """Parse a binary P5 PGM with maxval 255.

    Raises
    ------
    ImageFormatError
        Wrong magic, unsupported maxval, non-numeric header fields or
        truncated pixel data.
    """
    raw = bytes(raw)
    if raw[:2] != b"P5":
        raise ImageFormatError(f"wrong magic number {raw[:2]!r}, expected b'P5'")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _read_token(raw, pos)
        if not tok.isdigit():
            raise ImageFormatError(f"non-numeric {name} field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"maxval must be 255, got {maxval}")
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid dimensions {width}x{height}")
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise ImageFormatError("truncated PGM header")
    pos += 1  # exactly one whitespace byte before the raster
    need = width * height
    payload = raw[pos:pos + need]
    if len(payload) < need:
        raise ImageFormatError(f"truncated pixel data: expected {need} bytes, got {len(payload)}")
    return GrayImage(width, height, np.frombuffer(payload, dtype=np.uint8))


def dump_pgm(img: GrayImage) -> bytes:
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())


def write_pgm(img: GrayImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_pgm(img))


# ---------------------------------------------------------------------------
# pixel operations


def _round_half_up(v):
    # values are non-negative here, so half-up equals half-away-from-zero
    return np.floor(np.asarray(v, dtype=np.float64) + 0.5)


def to_grayscale(r: int, g: int, b: int) -> int:
    """BT.601 luma, rounded half away from zero and clamped to [0, 255]."""
    y = math.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5)
    return min(255, max(0, y))


def rgb_to_gray(rgb) -> GrayImage:
    """Convert an ``(H, W, 3)`` uint8 array to a GrayImage with BT.601 weights."""
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageSizeError(f"expected an (H, W, 3) array, got shape {arr.shape}")
    y = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return GrayImage.from_array(np.clip(_round_half_up(y), 0, 255).astype(np.uint8))


def _sample_coords(src: int, dst: int):
    # pixel-centre alignment
    pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0.0, src - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, src - 1)
    return lo, hi, pos - lo


def resize_bilinear(img: GrayImage, new_w: int, new_h: int) -> GrayImage:
    if new_w < 1 or new_h < 1:
        raise ImageSizeError(f"target dimensions must be positive, got {new_w}x{new_h}")
    if (new_w, new_h) == (img.width, img.height):
        return img
    src = img.pixels.astype(np.float64)
    x0, x1, fx = _sample_coords(img.width, new_w)
    y0, y1, fy = _sample_coords(img.height, new_h)
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy)[:, None] + bottom * fy[:, None]
    return GrayImage.from_array(np.clip(_round_half_up(out), 0, 255).astype(np.uint8))


def build_pyramid(img: GrayImage, scale_factor: float = DEFAULT_SCALE, min_side: int = WINDOW) -> Pyramid:
    """Repeatedly downscale ``img`` by ``scale_factor`` while both sides stay >= ``min_side``."""
    if scale_factor <= 1:
        raise ValueError(f"scale_factor must be > 1, got {scale_factor}")
    if min_side < WINDOW:
        raise ValueError(f"min_side must be >= {WINDOW}, got {min_side}")
    if img.width < WINDOW or img.height < WINDOW:
        raise ImageSizeError(
            f"image {img.width}x{img.height} is smaller than the {WINDOW}x{WINDOW} window"
        )
    levels = [img]
    cur = img
    while True:
        w = math.floor(cur.width / scale_factor)
        h = math.floor(cur.height / scale_factor)
        if w < min_side or h < min_side:
            break
        cur = resize_bilinear(cur, w, h)
        levels.append(cur)
    return Pyramid(levels=levels, scale_factor=scale_factor)
