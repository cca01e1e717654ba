"""Procedural face crops, negative windows and scenes for training and tests.

Faces are drawn from a handful of per-person shape parameters (head
ellipse, eye spacing and size, brows, mouth, hair, glasses). A *capture* of a
person adds brightness jitter and sensor noise, so two captures of the same
person differ pixel-wise but share structure. Everything is seeded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .imagecore import WINDOW, GrayImage


@dataclass(frozen=True)
class Person:
    head_rx: float
    head_ry: float
    skin: float
    eye_dx: float
    eye_y: float
    eye_r: float
    brow: float
    mouth_w: float
    mouth_y: float
    nose: float
    hair: float
    glasses: bool

    @classmethod
    def from_seed(cls, seed: int) -> "Person":
        r = np.random.default_rng([0xFACE, seed])
        return cls(
            head_rx=r.uniform(19, 25),
            head_ry=r.uniform(25, 30),
            skin=r.uniform(165, 220),
            eye_dx=r.uniform(7.5, 12.5),
            eye_y=r.uniform(22, 28),
            eye_r=r.uniform(2.5, 4.5),
            brow=r.uniform(0, 1),
            mouth_w=r.uniform(6, 13),
            mouth_y=r.uniform(43, 49),
            nose=r.uniform(4, 10),
            hair=r.uniform(0, 1),
            glasses=bool(r.uniform() < 0.35),
        )


def _rng(*seed) -> np.random.Generator:
    return np.random.default_rng(list(seed))


def background(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth clutter: upsampled low-frequency noise, a few flat shapes, sensor noise."""
    gh, gw = h // 16 + 2, w // 16 + 2
    coarse = rng.uniform(50, 150, size=(gh, gw))
    ys = np.linspace(0, gh - 1, h)
    xs = np.linspace(0, gw - 1, w)
    y0 = np.floor(ys).astype(int).clip(0, gh - 2)
    x0 = np.floor(xs).astype(int).clip(0, gw - 2)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    img = (coarse[y0][:, x0] * (1 - fy) * (1 - fx) + coarse[y0 + 1][:, x0] * fy * (1 - fx)
           + coarse[y0][:, x0 + 1] * (1 - fy) * fx + coarse[y0 + 1][:, x0 + 1] * fy * fx)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(1, 4)):
        kind = rng.integers(0, 3)
        val = rng.uniform(30, 230)
        if kind == 0:
            x1, y1 = rng.integers(0, w), rng.integers(0, h)
            img[y1:y1 + rng.integers(6, 40), x1:x1 + rng.integers(6, 40)] = val
        elif kind == 1:
            cx, cy, rr = rng.uniform(0, w), rng.uniform(0, h), rng.uniform(4, 14)
            img[(xx - cx) ** 2 + (yy - cy) ** 2 < rr * rr] = val
        else:
            y1 = rng.integers(0, h)
            img[y1:y1 + rng.integers(2, 5), :] = val
    img += rng.normal(0, 3, size=img.shape)
    return img


def render_face(canvas: np.ndarray, x0: float, y0: float, person: Person,
                rng: np.random.Generator, scale: float = 1.0) -> None:
    """Draw ``person`` into ``canvas`` in place; the 64x64 face box starts at ``(x0, y0)``."""
    h, w = canvas.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # face-local coordinates in the canonical 64x64 frame
    u = (xx - x0) / scale
    v = (yy - y0) / scale
    p = person
    light = rng.uniform(-6, 6)
    skin = p.skin + light
    cx, cy = 32.0, 34.0

    head = ((u - cx) / p.head_rx) ** 2 + ((v - cy) / p.head_ry) ** 2 < 1.0
    canvas[head] = skin
    if p.hair > 0.45:
        cap = head & (v < cy - p.head_ry * (0.55 + 0.25 * (p.hair - 0.45)))
        canvas[cap] = 40 + light
    for side in (-1, 1):
        ex = cx + side * p.eye_dx
        eye = ((u - ex) / (p.eye_r * 1.4)) ** 2 + ((v - p.eye_y) / p.eye_r) ** 2 < 1.0
        canvas[eye] = 45 + light
        if p.brow > 0.3:
            by = p.eye_y - p.eye_r - 3
            brow = (np.abs(v - by) < 1.0 + p.brow) & (np.abs(u - ex) < p.eye_r * 1.6)
            canvas[brow] = 70 + light
        if p.glasses:
            rr = np.sqrt(((u - ex) / 1.2) ** 2 + (v - p.eye_y) ** 2)
            canvas[(rr > p.eye_r + 2.5) & (rr < p.eye_r + 4.0)] = 25 + light
    if p.glasses:
        bridge = (np.abs(v - p.eye_y) < 0.8) & (np.abs(u - cx) < p.eye_dx - p.eye_r - 2)
        canvas[bridge] = 25 + light
    nose = (np.abs(u - cx) < 1.5) & (v > p.eye_y + 3) & (v < p.eye_y + 3 + p.nose)
    canvas[nose] = skin - 45
    mouth = ((u - cx) / p.mouth_w) ** 2 + ((v - p.mouth_y) / 2.2) ** 2 < 1.0
    canvas[mouth] = 80 + light


def _finish(canvas: np.ndarray, rng: np.random.Generator, noise: float) -> GrayImage:
    canvas = canvas + rng.normal(0, noise, size=canvas.shape)
    return GrayImage.from_array(np.clip(np.floor(canvas + 0.5), 0, 255))


def face_crop(person_seed: int, capture: int = 0, noise: float = 2.0) -> GrayImage:
    rng = _rng(1, person_seed, capture)
    canvas = background(WINDOW, WINDOW, rng)
    render_face(canvas, 0, 0, Person.from_seed(person_seed), rng)
    return _finish(canvas, rng, noise)


def negative_windows(n: int, seed: int = 0, face_seeds=range(8)) -> List[GrayImage]:
    """Non-face windows: plain clutter, off-centre faces and wrongly scaled faces."""
    rng = _rng(2, seed)
    faces = list(face_seeds)
    out = []
    for i in range(n):
        kind = i % 4
        if kind <= 1 or not faces:
            canvas = background(WINDOW, WINDOW, rng)
        elif kind == 2:
            # face displaced by at least 3 cells so the window holds only part of it
            canvas = background(3 * WINDOW, 3 * WINDOW, rng)
            off = [0, 0]
            while max(abs(off[0]), abs(off[1])) < 24:
                off = rng.integers(-48, 49, size=2)
            render_face(canvas, WINDOW + off[0], WINDOW + off[1],
                        Person.from_seed(faces[i % len(faces)]), rng)
            canvas = canvas[WINDOW:2 * WINDOW, WINDOW:2 * WINDOW]
        else:
            canvas = background(3 * WINDOW, 3 * WINDOW, rng)
            s = rng.choice([rng.uniform(0.4, 0.65), rng.uniform(1.6, 2.2)])
            c = 1.5 * WINDOW - 32 * s + rng.uniform(-4, 4, size=2)
            render_face(canvas, c[0], c[1], Person.from_seed(faces[i % len(faces)]), rng, scale=s)
            canvas = canvas[WINDOW:2 * WINDOW, WINDOW:2 * WINDOW]
        out.append(_finish(canvas, rng, 2.0))
    return out


def scene(person_seed: int, width: int, height: int, x: int, y: int,
          capture: int = 0, seed: int = 0) -> GrayImage:
    """A ``width x height`` clutter image with one face whose box is ``(x, y, 64)``."""
    rng = _rng(3, seed, person_seed, capture)
    canvas = background(height, width, rng)
    render_face(canvas, x, y, Person.from_seed(person_seed), rng)
    return _finish(canvas, rng, 2.0)


def blank(width: int = 128, height: int = 128, value: int = 128) -> GrayImage:
    return GrayImage.from_array(np.full((height, width), value, dtype=np.uint8))


def training_set(persons=range(8), captures: int = 4, n_negative: int = 320,
                 seed: int = 0) -> Tuple[List[GrayImage], List[GrayImage]]:
    positives = [face_crop(p, c) for p in persons for c in range(captures)]
    return positives, negative_windows(n_negative, seed, face_seeds=persons)


ENROLLED_PERSON = 1
IMPOSTOR_PERSON = 3


def two_face_scene(seed: int = 0) -> GrayImage:
    rng = _rng(4, seed)
    canvas = background(128, 224, rng)
    render_face(canvas, 16, 32, Person.from_seed(ENROLLED_PERSON), rng)
    render_face(canvas, 136, 40, Person.from_seed(IMPOSTOR_PERSON), rng)
    return _finish(canvas, rng, 2.0)


def demo_faces() -> dict:
    """Named images for a walkthrough: enrollment shot, a second capture, an impostor, edge cases."""
    return {
        "user_enroll": scene(ENROLLED_PERSON, 160, 128, 48, 40),
        "user_live": scene(ENROLLED_PERSON, 176, 144, 88, 56, capture=1, seed=1),
        "impostor": scene(IMPOSTOR_PERSON, 160, 128, 40, 32, capture=1, seed=2),
        "blank": blank(),
        "two_faces": two_face_scene(),
    }


# ---------------------------------------------------------------------------
# byte corpus, grouped like the media categories used in the evaluation

_WORDS = ("the of and to in is that for it as with was on be by this are from at or an "
          "face key image file data secure cipher block vector entropy random user access").split()


def _text(rng, n) -> bytes:
    words = rng.choice(_WORDS, size=n // 3)
    lines = [" ".join(words[i:i + 12]) for i in range(0, len(words), 12)]
    return ("\n".join(lines) + "\n").encode()


def _fill(gen, size, rng) -> bytes:
    out = bytearray()
    while len(out) < size:
        out += gen(rng)
    out = out[:size]
    if out[-1] == 0:
        out[-1] = 0x0A
    return bytes(out)


def _zip_member(name, payload) -> bytes:
    import io
    import zipfile

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo(name, date_time=(2024, 1, 1, 0, 0, 0))
        info.compress_type = zipfile.ZIP_DEFLATED
        zf.writestr(info, payload)
    return buf.getvalue()


def _wav(rng) -> bytes:
    t = np.arange(8000)
    f = rng.uniform(200, 900)
    samples = (12000 * np.sin(2 * np.pi * f * t / 8000) + rng.normal(0, 300, t.size)).astype("<i2")
    return b"RIFF\x24\x00\x01\x00WAVEfmt " + samples.tobytes()


def _mp3(rng) -> bytes:
    import zlib

    return b"\xff\xfb\x90\x64" + zlib.compress(_wav(rng), 6)


def _tiff(rng) -> bytes:
    yy, xx = np.mgrid[0:64, 0:256]
    px = ((xx + yy * rng.uniform(0.5, 2)) % 256).astype(np.uint8)
    px = np.clip(px.astype(int) + rng.integers(-8, 9, px.shape), 0, 255).astype(np.uint8)
    return b"II*\x00\x08\x00\x00\x00" + px.tobytes()


def _png(rng) -> bytes:
    import zlib

    return b"\x89PNG\r\n\x1a\n" + zlib.compress(_tiff(rng), 9)


def _pdf(rng) -> bytes:
    import zlib

    body = zlib.compress(_text(rng, 2000), 6)
    head = b"%%PDF-1.4\n1 0 obj << /Length %d /Filter /FlateDecode >>\nstream\n" % len(body)
    return (head + body + b"\nendstream\nendobj\n")


def _html(rng) -> bytes:
    return b"<html><body><div class=\"p\"><p>" + _text(rng, 600).replace(b"\n", b"</p>\n<p>") + b"</p></div>\n"


def _exe(rng) -> bytes:
    code = rng.integers(0, 256, 1024, dtype=np.uint8).tobytes()
    return b"MZ\x90\x00\x03" + b"\x00" * 59 + code + b"\x00" * 256 + b"\xcc" * 64


CORPUS = {
    "audio/sample.mp3": _mp3,
    "audio/sample.wav": _wav,
    "document/sample.docx": lambda rng: _zip_member("word/document.xml", _text(rng, 4000)),
    "document/sample.pdf": _pdf,
    "document/sample.txt": lambda rng: _text(rng, 4000),
    "document/sample.html": _html,
    "image/sample.png": _png,
    "image/sample.tiff": _tiff,
    "video/sample.mp4": lambda rng: b"\x00\x00\x00\x18ftypmp42" + rng.bytes(4096),
    "others/sample.exe": _exe,
}


def corpus(size: int = 64 * 1024, seed: int = 0) -> dict:
    """Ten pseudo-files of ``size`` bytes, structured and random, none ending in 0x00."""
    return {name: _fill(gen, size, _rng(5, seed, i)) for i, (name, gen) in enumerate(CORPUS.items())}


def write_corpus(root, size: int = 64 * 1024, seed: int = 0) -> list:
    from pathlib import Path

    root = Path(root)
    paths = []
    for name, data in corpus(size, seed).items():
        p = root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)
        paths.append(p)
    return paths
