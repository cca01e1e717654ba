"""Acceptance criteria 1-10. Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines."""

import time

import numpy as np
import pytest

from biocrypt import synthetic
from biocrypt.cipher import decrypt, encrypt, encrypt_with_iv
from biocrypt.cli import main
from biocrypt.detector import Detection, detect_faces, iou, nms
from biocrypt.enrollment import TemplateStore, authenticate, derive_key, enroll
from biocrypt.hog import DESCRIPTOR_LENGTH, hog_descriptor
from biocrypt.imagecore import GrayImage
from biocrypt.metrics import (
    PerturbationSpec,
    analyze_file,
    bit_correlation,
    normalized_hamming,
    perturb_bytes,
    shannon_entropy,
)

from .oracles import naive_hog
from .test_cipher import NIST_C, NIST_IV, NIST_KEY, NIST_P
from .test_detector import SCENES

pytestmark = pytest.mark.acceptance


def verdict(n, ok, detail):
    print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def test_01_aes_cbc_vectors():
    t = time.perf_counter()
    enc = encrypt_with_iv(NIST_P, NIST_KEY, NIST_IV).body == NIST_C
    dec = decrypt(NIST_IV + NIST_C, NIST_KEY) == NIST_P
    dt = time.perf_counter() - t
    verdict(1, enc and dec and dt < 1.0, f"encrypt={enc} decrypt={dec} in {dt:.3f}s")


def test_02_round_trip():
    rng = np.random.default_rng(2)
    key = rng.integers(0, 256, 32, dtype=np.uint8).tobytes()
    t = time.perf_counter()
    bad = 0
    for n in rng.integers(0, 4097, 1000):
        p = bytearray(rng.integers(0, 256, int(n), dtype=np.uint8).tobytes())
        if p and p[-1] == 0:
            p[-1] = int(rng.integers(1, 256))
        if decrypt(encrypt(bytes(p), key).to_bytes(), key) != p:
            bad += 1
    dt = time.perf_counter() - t
    verdict(2, bad == 0 and dt < 10.0, f"{bad}/1000 mismatches in {dt:.2f}s")


def test_03_table_reproduction():
    key, iv = bytes(range(32)), bytes(range(16))
    spec = PerturbationSpec(0.5, 42)
    t = time.perf_counter()
    failures = []
    worst = {"corr": 0.0, "ent": 8.0, "ham": (1.0, 0.0), "ava": (100.0, 0.0)}
    for name, data in synthetic.corpus(64 * 1024).items():
        assert len(data) >= 64 * 1024
        r = analyze_file(data, key, iv, spec, name)
        worst["corr"] = max(worst["corr"], abs(r.correlation))
        worst["ent"] = min(worst["ent"], r.entropy_cipher)
        worst["ham"] = (min(worst["ham"][0], r.hamming_norm), max(worst["ham"][1], r.hamming_norm))
        worst["ava"] = (min(worst["ava"][0], r.avalanche_pct), max(worst["ava"][1], r.avalanche_pct))
        if not (abs(r.correlation) <= 0.01 and r.entropy_cipher >= 7.95
                and 0.49 <= r.hamming_norm <= 0.51 and 49 <= r.avalanche_pct <= 51):
            failures.append(r)
    dt = time.perf_counter() - t
    verdict(3, not failures and dt < 30.0,
            f"10 files, max|corr|={worst['corr']:.4f} min H_c={worst['ent']:.4f} "
            f"hamming={worst['ham'][0]:.4f}..{worst['ham'][1]:.4f} "
            f"avalanche={worst['ava'][0]:.2f}..{worst['ava'][1]:.2f}% in {dt:.2f}s; failing={failures}")


def test_04_metric_oracles():
    a = bytes(range(256))
    comp = bytes(x ^ 0xFF for x in a)
    checks = {
        "entropy(aab)": abs(shannon_entropy(b"aab") - 0.918296) <= 1e-6,
        "corr(0101,0110)": abs(bit_correlation(b"\x55", b"\x66")) <= 1e-12,
        "hamming(A0,80)": normalized_hamming(b"\xa0", b"\x80") == 0.125,
        "corr complement": bit_correlation(a, comp) == -1.0,
        "hamming complement": normalized_hamming(a, comp) == 1.0,
        "corr self": bit_correlation(a, a) == 1.0,
    }
    verdict(4, all(checks.values()), ", ".join(f"{k}={v}" for k, v in checks.items()))


def test_05_hog_oracle():
    rng = np.random.default_rng(5)
    t = time.perf_counter()
    worst = 0.0
    lengths = set()
    for _ in range(20):
        px = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        d = hog_descriptor(GrayImage.from_array(px))
        lengths.add(d.shape[0])
        worst = max(worst, float(np.max(np.abs(d - np.array(naive_hog(px.tolist()))))))
    dt = time.perf_counter() - t
    verdict(5, worst <= 1e-9 and lengths == {DESCRIPTOR_LENGTH} and dt < 5.0,
            f"max abs diff {worst:.2e}, lengths {sorted(lengths)}, {dt:.2f}s incl. naive oracle")


def test_06_detector_fixtures(model, training_features):
    X, y = training_features
    acc = float(np.mean(model.predict(X) == y))
    ious = []
    counts = []
    for person, w, h, x, yy in SCENES:
        dets = detect_faces(synthetic.scene(person, w, h, x, yy), model)
        counts.append(len(dets))
        ious.append(iou(dets[0], Detection(x, yy, 64, 0)) if dets else 0.0)
    a, b = Detection(0, 0, 10, 1.0), Detection(5, 5, 10, 0.9)
    nms_ok = (iou(a, b) == 25 / 175 and abs(iou(a, b) - 1 / 7) < 1e-15
              and nms([b, a], 0.1) == [a] and nms([b, a], 0.2) == [a, b])
    ok = acc == 1.0 and counts == [1] * 5 and min(ious) >= 0.5 and nms_ok
    verdict(6, ok, f"train acc {acc:.3f}, detections {counts}, min IoU {min(ious):.3f}, nms ok={nms_ok}")


def test_07_key_determinism(model, faces):
    store = TemplateStore()
    t = enroll(store, "alice", faces["user_enroll"], model, now=0)
    keys = {derive_key(store.get("alice")) for _ in range(100)}
    before = derive_key(t)
    for img in ("user_live", "impostor", "user_enroll"):
        authenticate(store, "alice", faces[img], model)
    after = derive_key(store.get("alice"))
    ok = len(keys) == 1 and before == after and len(before) == 32
    verdict(7, ok, f"{len(keys)} distinct key(s) over 100 runs, stable={before == after}, len={len(before)}")


def test_08_authentication(model, faces):
    store = TemplateStore()
    enroll(store, "alice", faces["user_enroll"], model, now=0)
    me = authenticate(store, "alice", faces["user_enroll"], model, 0.85)
    other = authenticate(store, "alice", faces["impostor"], model, 0.85)
    ok = abs(me.similarity - 1.0) <= 1e-12 and me.matched and not other.matched
    verdict(8, ok, f"self sim={me.similarity:.15f} matched={me.matched}; "
                   f"impostor sim={other.similarity:.4f} matched={other.matched}")


def test_09_perturbation():
    data = np.random.default_rng(9).integers(0, 256, 10_000, dtype=np.uint8).tobytes()
    spec = PerturbationSpec(0.5, 1234)
    out = perturb_bytes(data, spec)
    diffs = [a ^ b for a, b in zip(data, out) if a != b]
    one_bit = all(bin(d).count("1") == 1 for d in diffs)
    same = perturb_bytes(data, spec) == out
    ok = len(diffs) == 5000 and one_bit and same
    verdict(9, ok, f"{len(diffs)} bytes changed, one bit each={one_bit}, reproducible={same}")


def test_10_end_to_end_cli(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("BIOCRYPT_CONFIG", raising=False)
    t = time.perf_counter()
    root = tmp_path / "demo"
    common = ["--model", str(tmp_path / "m.bsvm"), "--store", str(tmp_path / "s.bcry")]
    codes = [main(["synth", str(root)]),
             main(["train", str(root / "positives"), str(root / "negatives"), "--out", str(tmp_path / "m.bsvm")]),
             main(["enroll", "alice", str(root / "faces" / "user_enroll.pgm")] + common)]
    live = str(root / "faces" / "user_live.pgm")
    files = sorted(p for p in (root / "corpus").rglob("*") if p.is_file())
    exts = {p.suffix for p in files}
    restored = 0
    for f in files:
        assert f.read_bytes()[-1] != 0
        enc, out = tmp_path / f"{f.name}.enc", tmp_path / f"{f.name}.out"
        codes.append(main(["encrypt", "alice", live, str(f), str(enc)] + common))
        codes.append(main(["decrypt", "alice", live, str(enc), str(out)] + common))
        restored += out.read_bytes() == f.read_bytes()
    r1, r2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    codes.append(main(["analyze", str(root / "corpus"), str(r1), "--user", "alice", "--live", live] + common))
    codes.append(main(["analyze", str(root / "corpus"), str(r2), "--user", "alice", "--live", live] + common))
    same_csv = r1.read_bytes() == r2.read_bytes() and len(r1.read_text().splitlines()) == 11
    dt = time.perf_counter() - t
    capsys.readouterr()
    ok = set(codes) == {0} and len(exts) == 10 and restored == 10 and same_csv and dt < 60.0
    verdict(10, ok, f"{restored}/{len(files)} files restored over {len(exts)} extensions, "
                    f"CSV identical={same_csv}, exit codes ok={set(codes) == {0}}, {dt:.1f}s")
