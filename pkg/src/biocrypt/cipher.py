"""AES-256-CBC with null padding and an IV-prefixed envelope.

The envelope is ``IV || C1 || ... || Cn`` with no header. CBC chaining is
done here block by block (``C_i = AES_K(P_i xor C_{i-1})``, ``C_0 = IV``);
only the raw AES block transform comes from ``cryptography``.

Decryption strips *all* trailing 0x00 bytes, so a plaintext that itself
ends in 0x00 does not survive a round trip under the default ``"null"``
padding. ``padding="pkcs7"`` is the lossless alternative; envelopes made
with one mode must be opened with the same mode.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .exceptions import EnvelopeError, KeyLengthError

BLOCK = 16
KEY_BYTES = 32
PADDINGS = ("null", "pkcs7")


@dataclass(frozen=True)
class CipherEnvelope:
    iv: bytes
    body: bytes

    def __post_init__(self):
        if len(self.iv) != BLOCK:
            raise EnvelopeError(f"IV must be {BLOCK} bytes, got {len(self.iv)}")
        if len(self.body) % BLOCK:
            raise EnvelopeError(f"ciphertext length {len(self.body)} is not a multiple of {BLOCK}")

    def to_bytes(self) -> bytes:
        return self.iv + self.body

    @classmethod
    def from_bytes(cls, raw: bytes) -> "CipherEnvelope":
        raw = bytes(raw)
        if len(raw) < BLOCK:
            raise EnvelopeError(f"envelope of {len(raw)} bytes is shorter than the {BLOCK}-byte IV")
        return cls(raw[:BLOCK], raw[BLOCK:])

    def __len__(self):
        return BLOCK + len(self.body)


def _check_key(key: bytes) -> bytes:
    key = bytes(key)
    if len(key) != KEY_BYTES:
        raise KeyLengthError(f"AES-256 key must be {KEY_BYTES} bytes, got {len(key)}")
    return key


def _xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(len(a), "little")


def pad_null(p: bytes) -> bytes:
    return bytes(p) + b"\x00" * ((BLOCK - len(p) % BLOCK) % BLOCK)


def pad_pkcs7(p: bytes) -> bytes:
    k = BLOCK - len(p) % BLOCK
    return bytes(p) + bytes([k]) * k


def unpad_pkcs7(p: bytes) -> bytes:
    if not p:
        raise EnvelopeError("empty plaintext has no PKCS#7 padding")
    k = p[-1]
    if not 1 <= k <= BLOCK or p[-k:] != bytes([k]) * k:
        raise EnvelopeError("invalid PKCS#7 padding")
    return p[:-k]


def _pad(p: bytes, padding: str) -> bytes:
    if padding == "null":
        return pad_null(p)
    if padding == "pkcs7":
        return pad_pkcs7(p)
    raise ValueError(f"padding must be one of {PADDINGS}, got {padding!r}")


def encrypt_with_iv(p: bytes, key: bytes, iv: bytes, padding: str = "null") -> CipherEnvelope:
    key = _check_key(key)
    iv = bytes(iv)
    if len(iv) != BLOCK:
        raise EnvelopeError(f"IV must be {BLOCK} bytes, got {len(iv)}")
    data = _pad(bytes(p), padding)
    aes = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    prev = iv
    out = []
    for i in range(0, len(data), BLOCK):
        prev = aes.update(_xor(data[i:i + BLOCK], prev))
        out.append(prev)
    return CipherEnvelope(iv, b"".join(out))


def encrypt(p: bytes, key: bytes, padding: str = "null") -> CipherEnvelope:
    """Encrypt under a fresh IV drawn from ``os.urandom``."""
    _check_key(key)
    return encrypt_with_iv(p, key, os.urandom(BLOCK), padding)


def decrypt(c, key: bytes, padding: str = "null") -> bytes:
    """Open an envelope (``CipherEnvelope`` or its serialized bytes)."""
    key = _check_key(key)
    if not isinstance(c, CipherEnvelope):
        c = CipherEnvelope.from_bytes(c)
    if padding not in PADDINGS:
        raise ValueError(f"padding must be one of {PADDINGS}, got {padding!r}")
    if not c.body:
        return b""
    aes = Cipher(algorithms.AES(key), modes.ECB()).decryptor()
    # P_i = AES^-1(C_i) xor C_{i-1}; the chained blocks are all known, so one XOR suffices
    plain = _xor(aes.update(c.body), c.iv + c.body[:-BLOCK])
    if padding == "pkcs7":
        return unpad_pkcs7(plain)
    return plain.rstrip(b"\x00")
