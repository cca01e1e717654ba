"""Cipher quality measures: bit correlation, entropy, Hamming distance, avalanche."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .cipher import encrypt_with_iv
from .exceptions import ZeroVarianceError

MASK64 = 0xFFFFFFFFFFFFFFFF
CSV_HEADER = ("file", "correlation", "entropy_plain", "entropy_cipher", "hamming_norm", "avalanche_pct")


class SplitMix64:
    """Vigna's splitmix64; the same seed gives the same stream everywhere."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)``; rejection sampling removes modulo bias."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = self.next()
            if r < limit:
                return r % bound


@dataclass(frozen=True)
class PerturbationSpec:
    fraction: float = 0.5
    seed: int = 42

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {self.fraction}")

    def count(self, length: int) -> int:
        return math.floor(self.fraction * length)


@dataclass(frozen=True)
class MetricsReport:
    file_label: str
    correlation: float
    entropy_plain: float
    entropy_cipher: float
    hamming_norm: float
    avalanche_pct: float

    def row(self):
        return [self.file_label] + [
            format(v, ".9g") for v in (self.correlation, self.entropy_plain, self.entropy_cipher,
                                       self.hamming_norm, self.avalanche_pct)
        ]


def _bits(data: bytes, nbytes: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8, count=nbytes))


def _nonempty(*bufs):
    for b in bufs:
        if len(b) == 0:
            raise ValueError("input must be nonempty")


def bit_correlation(a: bytes, b: bytes) -> float:
    """Pearson coefficient between the MSB-first bit streams of ``a`` and ``b``.

    Both streams are truncated to the shorter length. Sums are taken in
    exact integer arithmetic, so complementary inputs give exactly -1.0.
    """
    _nonempty(a, b)
    m = min(len(a), len(b))
    x = _bits(a, m)
    y = _bits(b, m)
    n = x.size
    sx = int(x.sum())
    sy = int(y.sum())
    sxy = int(np.count_nonzero(x & y))
    # n^2 * covariance and n^2 * variances (bits are 0/1 so x^2 == x)
    cov = n * sxy - sx * sy
    vx = n * sx - sx * sx
    vy = n * sy - sy * sy
    if vx == 0 or vy == 0:
        raise ZeroVarianceError("correlation undefined: a bit stream is constant")
    prod = vx * vy
    root = math.isqrt(prod)
    if root * root == prod:
        return cov / root
    return cov / math.sqrt(prod)


def shannon_entropy(data: bytes) -> float:
    """Entropy of the byte-value distribution, in bits per byte."""
    _nonempty(data)
    counts = np.bincount(np.frombuffer(bytes(data), dtype=np.uint8), minlength=256)
    p = counts[counts > 0] / len(data)
    return float(abs(-np.sum(p * np.log2(p))))


def normalized_hamming(a: bytes, b: bytes) -> float:
    _nonempty(a, b)
    m = min(len(a), len(b))
    diff = np.bitwise_xor(np.frombuffer(bytes(a), np.uint8, count=m),
                          np.frombuffer(bytes(b), np.uint8, count=m))
    return int(np.unpackbits(diff).sum()) / (8 * m)


def perturbed_positions(length: int, spec: PerturbationSpec) -> list:
    """First ``floor(fraction * length)`` entries of a seeded Fisher-Yates shuffle of ``range(length)``."""
    k = spec.count(length)
    idx = list(range(length))
    rng = SplitMix64(spec.seed)
    for i in range(k):
        j = i + rng.below(length - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k]


def perturb_bytes(data: bytes, spec: PerturbationSpec) -> bytes:
    """XOR each selected byte at position ``p`` with ``1 << (p % 8)``."""
    out = bytearray(data)
    for p in perturbed_positions(len(out), spec):
        out[p] ^= 1 << (p % 8)
    return bytes(out)


def avalanche_percent(p: bytes, key: bytes, iv: bytes, spec: PerturbationSpec,
                      body=None) -> float:
    """Percentage of ciphertext bits that flip when ``p`` is perturbed.

    Both encryptions share ``key`` and ``iv``; the IV prefix is excluded.
    ``body`` may carry a precomputed ciphertext body of ``p``.
    """
    _nonempty(p)
    if body is None:
        body = encrypt_with_iv(p, key, iv).body
    body2 = encrypt_with_iv(perturb_bytes(p, spec), key, iv).body
    return normalized_hamming(body, body2) * 100.0


def analyze_file(plain: bytes, key: bytes, iv: bytes, spec: PerturbationSpec,
                 label: str) -> MetricsReport:
    _nonempty(plain)
    body = encrypt_with_iv(plain, key, iv).body
    return MetricsReport(
        file_label=label,
        correlation=bit_correlation(plain, body),
        entropy_plain=shannon_entropy(plain),
        entropy_cipher=shannon_entropy(body),
        hamming_norm=normalized_hamming(plain, body),
        avalanche_pct=avalanche_percent(plain, key, iv, spec, body=body),
    )


def reports_to_csv(reports: Iterable[MetricsReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()

