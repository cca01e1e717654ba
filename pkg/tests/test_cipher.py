import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biocrypt.cipher import (
    CipherEnvelope,
    decrypt,
    encrypt,
    encrypt_with_iv,
    pad_null,
    pad_pkcs7,
    unpad_pkcs7,
)
from biocrypt.exceptions import EnvelopeError, KeyLengthError

# NIST SP 800-38A, F.2.5 / F.2.6 (CBC-AES256)
NIST_KEY = bytes.fromhex("603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4")
NIST_IV = bytes(range(16))
NIST_P = bytes.fromhex(
    "6bc1bee22e409f96e93d7e117393172a"
    "ae2d8a571e03ac9c9eb76fac45af8e51"
    "30c81c46a35ce411e5fbc1191a0a52ef"
    "f69f2445df4f9b17ad2b417be66c3710")
NIST_C = bytes.fromhex(
    "f58c4c04d6e5f1ba779eabfb5f7bfbd6"
    "9cfc4e967edb808d679f777bc6702c7d"
    "39f23369a9d9bacfa530e26304231461"
    "b2eb05e2c39be9fcda6c19078c6a9d1b")

KEY = bytes(range(32))


class TestKnownAnswer:
    def test_encrypt(self):
        env = encrypt_with_iv(NIST_P, NIST_KEY, NIST_IV)
        assert env.body == NIST_C
        assert env.to_bytes() == NIST_IV + NIST_C

    def test_decrypt(self):
        assert decrypt(NIST_IV + NIST_C, NIST_KEY) == NIST_P

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_prefix_blocks(self, n):
        # CBC output for the first n blocks does not depend on later blocks
        assert encrypt_with_iv(NIST_P[:16 * n], NIST_KEY, NIST_IV).body == NIST_C[:16 * n]


class TestPadding:
    @pytest.mark.parametrize("n, padded", [(0, 0), (1, 16), (15, 16), (16, 16), (17, 32)])
    def test_pad_null_lengths(self, n, padded):
        out = pad_null(b"\x41" * n)
        assert len(out) == padded and out[:n] == b"\x41" * n and set(out[n:]) <= {0}

    def test_pkcs7(self):
        assert pad_pkcs7(b"") == bytes([16]) * 16
        assert pad_pkcs7(b"a" * 15) == b"a" * 15 + b"\x01"
        assert unpad_pkcs7(pad_pkcs7(b"abc")) == b"abc"
        with pytest.raises(EnvelopeError):
            unpad_pkcs7(b"a" * 15 + b"\x00")
        with pytest.raises(EnvelopeError):
            unpad_pkcs7(b"a" * 14 + b"\x01\x02")


class TestRoundTrip:
    def test_empty_plaintext(self):
        env = encrypt(b"", KEY)
        assert len(env.to_bytes()) == 16
        assert decrypt(env, KEY) == b""

    @settings(max_examples=100, deadline=None)
    @given(st.binary(max_size=300).filter(lambda b: not b.endswith(b"\x00")))
    def test_null_padding(self, p):
        env = encrypt(p, KEY)
        assert len(env) == 16 + 16 * ((len(p) + 15) // 16)
        assert decrypt(env.to_bytes(), KEY) == p

    @settings(max_examples=100, deadline=None)
    @given(st.binary(max_size=300))
    def test_pkcs7_lossless(self, p):
        env = encrypt(p, KEY, padding="pkcs7")
        assert len(env) == 16 + 16 * (len(p) // 16 + 1)
        assert decrypt(env, KEY, padding="pkcs7") == p

    def test_trailing_zero_lost_under_null_padding(self):
        assert decrypt(encrypt(b"\x41\x00", KEY), KEY) == b"\x41"
        assert decrypt(encrypt(b"\x00" * 20, KEY), KEY) == b""

    def test_random_ivs_differ(self):
        a, b = encrypt(b"same", KEY), encrypt(b"same", KEY)
        assert a.iv != b.iv and a.body != b.body

    def test_wrong_key_does_not_restore(self):
        p = os.urandom(64) + b"\x01"
        env = encrypt(p, KEY)
        assert decrypt(env, bytes(32)) != p


class TestErrors:
    @pytest.mark.parametrize("n", [0, 16, 31, 33])
    def test_key_length(self, n):
        with pytest.raises(KeyLengthError):
            encrypt(b"x", bytes(n))
        with pytest.raises(KeyLengthError):
            decrypt(bytes(32), bytes(n))

    def test_iv_length(self):
        with pytest.raises(EnvelopeError):
            encrypt_with_iv(b"x", KEY, bytes(15))

    @pytest.mark.parametrize("n", [0, 15, 17, 40])
    def test_bad_envelope(self, n):
        with pytest.raises(EnvelopeError):
            decrypt(bytes(n), KEY)

    def test_unknown_padding(self):
        with pytest.raises(ValueError):
            encrypt(b"x", KEY, padding="zero")
        with pytest.raises(ValueError):
            decrypt(bytes(32), KEY, padding="zero")

    def test_envelope_invariants(self):
        with pytest.raises(EnvelopeError):
            CipherEnvelope(bytes(16), bytes(5))
        assert CipherEnvelope.from_bytes(bytes(48)).body == bytes(32)


def test_cbc_bit_flip_malleability():
    # flipping a bit of C1 garbles P1 and flips the same bit of P2; there is no integrity check
    env = encrypt_with_iv(NIST_P, NIST_KEY, NIST_IV)
    raw = bytearray(env.to_bytes())
    raw[16 + 3] ^= 0x80
    out = decrypt(bytes(raw), NIST_KEY)
    assert out[:16] != NIST_P[:16]
    assert out[16:32] == bytes(x ^ (0x80 if i == 3 else 0) for i, x in enumerate(NIST_P[16:32]))
    assert out[32:] == NIST_P[32:]


def test_iv_flip_changes_only_first_block():
    raw = bytearray(NIST_IV + NIST_C)
    raw[0] ^= 1
    out = decrypt(bytes(raw), NIST_KEY)
    assert out[0] == NIST_P[0] ^ 1 and out[1:] == NIST_P[1:]
