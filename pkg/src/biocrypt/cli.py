"""``biocrypt`` command line: train, enroll, auth, encrypt, decrypt, analyze.

Exit codes
----------
0 success; 2 empty input directory or usage error; 3 unreadable/unwritable
file; 4 no face detected; 5 more than one face; 6 username already
enrolled; 7 authentication failed (including unknown user); 8 malformed
envelope.

Settings come from flags, then a ``key = value`` config file (``--config``
or ``$BIOCRYPT_CONFIG``), then built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import cipher, detector, enrollment, metrics, synthetic
from .exceptions import (
    DuplicateUserError,
    EnvelopeError,
    ImageFormatError,
    ImageSizeError,
    ModelFormatError,
    MultipleFacesError,
    NoFaceError,
    StoreFormatError,
    UnknownUserError,
)
from .hog import HOGTransformer
from .imagecore import GrayImage, load_pgm, rgb_to_gray, write_pgm

EXIT_OK = 0
EXIT_EMPTY = 2
EXIT_IO = 3
EXIT_NO_FACE = 4
EXIT_MULTI_FACE = 5
EXIT_DUPLICATE = 6
EXIT_AUTH = 7
EXIT_ENVELOPE = 8

CONFIG_ENV = "BIOCRYPT_CONFIG"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class Config:
    store_path: str = "biocrypt.store"
    model_path: str = "biocrypt.model"
    auth_threshold: float = enrollment.DEFAULT_AUTH_THRESHOLD
    detect_threshold: float = detector.DEFAULT_THRESHOLD
    nms_iou: float = detector.DEFAULT_NMS_IOU
    perturb_fraction: float = 0.5
    perturb_seed: int = 42
    analyze_iv: str = "000102030405060708090a0b0c0d0e0f"

    def validate(self) -> "Config":
        if not 0.0 <= self.nms_iou <= 1.0:
            raise CliError(EXIT_EMPTY, f"nms_iou must be in [0, 1], got {self.nms_iou}")
        if not -1.0 <= self.auth_threshold <= 1.0:
            raise CliError(EXIT_EMPTY, f"auth_threshold must be in [-1, 1], got {self.auth_threshold}")
        if not 0.0 <= self.perturb_fraction <= 1.0:
            raise CliError(EXIT_EMPTY, f"perturb_fraction must be in [0, 1], got {self.perturb_fraction}")
        try:
            iv = bytes.fromhex(self.analyze_iv)
        except ValueError:
            iv = b""
        if len(iv) != cipher.BLOCK:
            raise CliError(EXIT_EMPTY, "analyze_iv must be 32 hex digits")
        return self


def parse_config_file(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(EXIT_EMPTY, f"config line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def load_config(args: argparse.Namespace, environ=os.environ) -> Config:
    fields = {f.name: f for f in dataclasses.fields(Config)}
    values = {}
    path = getattr(args, "config", None) or environ.get(CONFIG_ENV)
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read config file {path}: {exc}") from exc
        for k, v in parse_config_file(text).items():
            if k not in fields:
                raise CliError(EXIT_EMPTY, f"unknown config key {k!r}")
            values[k] = v
    for k in fields:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    typed = {}
    for k, v in values.items():
        try:
            typed[k] = _coerce(fields[k].default, v)
        except ValueError as exc:
            raise CliError(EXIT_EMPTY, f"bad value for {k}: {v!r}") from exc
    return Config(**typed).validate()


def _coerce(default, value):
    if isinstance(default, float):
        return float(value)
    if isinstance(default, int):
        return int(value)
    return str(value)


# ---------------------------------------------------------------------------
# file helpers


def atomic_write(path, data: bytes) -> None:
    """Write via a temp file in the target directory, renamed on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc


def read_image(path) -> GrayImage:
    """Load a P5 PGM; other formats go through Pillow when it is installed."""
    raw = read_bytes(path)
    try:
        if raw[:2] == b"P5":
            return load_pgm(raw)
        try:
            from PIL import Image
        except ImportError:
            raise ImageFormatError("not a P5 PGM and Pillow is unavailable") from None
        import io

        with Image.open(io.BytesIO(raw)) as im:
            return rgb_to_gray(np.asarray(im.convert("RGB")))
    except (ImageFormatError, ImageSizeError, OSError) as exc:
        raise CliError(EXIT_IO, f"unreadable image {path}: {exc}") from exc


def _load_model(cfg: Config) -> detector.PegasosSVM:
    try:
        return detector.read_model(cfg.model_path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read model {cfg.model_path}: {exc}") from exc
    except ModelFormatError as exc:
        raise CliError(EXIT_IO, f"invalid model {cfg.model_path}: {exc}") from exc


def _load_store(cfg: Config, create: bool = False) -> enrollment.TemplateStore:
    if create and not os.path.exists(cfg.store_path):
        return enrollment.TemplateStore()
    try:
        return enrollment.read_store(cfg.store_path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read store {cfg.store_path}: {exc}") from exc
    except StoreFormatError as exc:
        raise CliError(EXIT_IO, f"invalid store {cfg.store_path}: {exc}") from exc


def _image_files(directory) -> List[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise CliError(EXIT_IO, f"{directory} is not a directory")
    files = sorted(p for p in d.iterdir() if p.is_file() and not p.name.startswith("."))
    if not files:
        raise CliError(EXIT_EMPTY, f"directory {directory} is empty")
    return files


def _face_errors(fn):
    try:
        return fn()
    except NoFaceError as exc:
        raise CliError(EXIT_NO_FACE, str(exc)) from exc
    except MultipleFacesError as exc:
        raise CliError(EXIT_MULTI_FACE, str(exc)) from exc
    except UnknownUserError as exc:
        raise CliError(EXIT_AUTH, str(exc)) from exc


def _authenticated_key(cfg: Config, username: str, live_path, hardened: bool) -> bytes:
    model = _load_model(cfg)
    store = _load_store(cfg)
    live = read_image(live_path)
    decision = _face_errors(lambda: enrollment.authenticate(
        store, username, live, model, cfg.auth_threshold, cfg.detect_threshold, cfg.nms_iou))
    print(f"similarity {decision.similarity:.6f} (threshold {decision.threshold})", file=sys.stderr)
    if not decision.matched:
        raise CliError(EXIT_AUTH, f"authentication failed for {username!r}")
    # the key comes from the stored template, never from the live capture
    return enrollment.derive_key(store.get(username), hardened=hardened)


# ---------------------------------------------------------------------------
# commands


def cmd_train(args, cfg: Config) -> int:
    pos = _image_files(args.positives)
    neg = _image_files(args.negatives)
    X = [read_image(p) for p in pos + neg]
    y = np.array([1] * len(pos) + [-1] * len(neg))
    try:
        feats = HOGTransformer().fit_transform(X)
    except ImageSizeError as exc:
        raise CliError(EXIT_IO, f"training images must be 64x64: {exc}") from exc
    model = detector.train_svm(feats, y, lam=args.lam, epochs=args.epochs, seed=args.seed)
    acc = float(np.mean(model.predict(feats) == y))
    out = args.out or cfg.model_path
    atomic_write(out, detector.dump_model(model))
    print(f"trained on {len(pos)} positive / {len(neg)} negative windows; "
          f"training accuracy {100 * acc:.2f}%; model written to {out}")
    return EXIT_OK


def cmd_enroll(args, cfg: Config) -> int:
    model = _load_model(cfg)
    store = _load_store(cfg, create=True)
    if args.username in store:
        raise CliError(EXIT_DUPLICATE, f"user {args.username!r} is already enrolled")
    img = read_image(args.image)
    try:
        _face_errors(lambda: enrollment.enroll(store, args.username, img, model,
                                               cfg.detect_threshold, cfg.nms_iou))
    except DuplicateUserError as exc:
        raise CliError(EXIT_DUPLICATE, str(exc)) from exc
    except enrollment.BlankEncodingError as exc:
        raise CliError(EXIT_NO_FACE, str(exc)) from exc
    atomic_write(cfg.store_path, enrollment.dump_store(store))
    print(f"enrolled {args.username!r} into {cfg.store_path}")
    return EXIT_OK


def cmd_auth(args, cfg: Config) -> int:
    model = _load_model(cfg)
    store = _load_store(cfg)
    img = read_image(args.image)
    d = _face_errors(lambda: enrollment.authenticate(
        store, args.username, img, model, cfg.auth_threshold, cfg.detect_threshold, cfg.nms_iou))
    print(f"{'match' if d.matched else 'mismatch'} similarity={d.similarity:.6f} threshold={d.threshold}")
    return EXIT_OK if d.matched else EXIT_AUTH


def cmd_encrypt(args, cfg: Config) -> int:
    key = _authenticated_key(cfg, args.username, args.live, args.hardened_key)
    data = read_bytes(args.input)
    padding = "pkcs7" if args.standard_padding else "null"
    if padding == "null" and data.endswith(b"\x00"):
        print(f"warning: {args.input} ends with 0x00 bytes; they will be lost on decryption "
              "(use --standard-padding to keep them)", file=sys.stderr)
    out = args.output or f"{args.input}.enc"
    atomic_write(out, cipher.encrypt(data, key, padding).to_bytes())
    print(f"encrypted {args.input} -> {out}")
    return EXIT_OK


def cmd_decrypt(args, cfg: Config) -> int:
    key = _authenticated_key(cfg, args.username, args.live, args.hardened_key)
    raw = read_bytes(args.input)
    try:
        plain = cipher.decrypt(raw, key, "pkcs7" if args.standard_padding else "null")
    except EnvelopeError as exc:
        raise CliError(EXIT_ENVELOPE, f"malformed envelope {args.input}: {exc}") from exc
    out = args.output
    if out is None:
        out = args.input[:-4] if args.input.endswith(".enc") else f"{args.input}.dec"
    atomic_write(out, plain)
    print(f"decrypted {args.input} -> {out}")
    return EXIT_OK


def _analyze_key(args, cfg: Config) -> bytes:
    if args.key_hex:
        try:
            key = bytes.fromhex(args.key_hex)
        except ValueError as exc:
            raise CliError(EXIT_EMPTY, "--key-hex is not valid hex") from exc
    elif args.key_file:
        key = read_bytes(args.key_file)
    elif args.user and args.live:
        key = _authenticated_key(cfg, args.user, args.live, args.hardened_key)
    else:
        raise CliError(EXIT_EMPTY, "analyze needs --key-hex, --key-file or --user with --live")
    if len(key) != cipher.KEY_BYTES:
        raise CliError(EXIT_EMPTY, f"key must be {cipher.KEY_BYTES} bytes, got {len(key)}")
    return key


def cmd_analyze(args, cfg: Config) -> int:
    root = Path(args.corpus)
    if not root.is_dir():
        raise CliError(EXIT_IO, f"{args.corpus} is not a directory")
    files = sorted(p for p in root.rglob("*") if p.is_file() and not p.name.startswith("."))
    if not files:
        raise CliError(EXIT_EMPTY, f"corpus {args.corpus} is empty")
    key = _analyze_key(args, cfg)
    iv = bytes.fromhex(cfg.analyze_iv)
    spec = metrics.PerturbationSpec(cfg.perturb_fraction, cfg.perturb_seed)
    reports = []
    for f in files:
        data = read_bytes(f)
        label = f.relative_to(root).as_posix()
        if not data:
            print(f"warning: skipping empty file {label}", file=sys.stderr)
            continue
        try:
            reports.append(metrics.analyze_file(data, key, iv, spec, label))
        except metrics.ZeroVarianceError:
            print(f"warning: {label} has constant bits; correlation reported as nan", file=sys.stderr)
            body = cipher.encrypt_with_iv(data, key, iv).body
            reports.append(metrics.MetricsReport(
                label, float("nan"), metrics.shannon_entropy(data), metrics.shannon_entropy(body),
                metrics.normalized_hamming(data, body),
                metrics.avalanche_percent(data, key, iv, spec, body=body)))
    text = metrics.reports_to_csv(reports)
    atomic_write(args.report, text.encode())
    print(text, end="")
    return EXIT_OK


def cmd_synth(args, cfg: Config) -> int:
    """Write a demo fixture tree (training windows, face scenes, mixed corpus)."""
    out = Path(args.outdir)
    for sub in ("positives", "negatives", "faces"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    pos, neg = synthetic.training_set()
    for i, img in enumerate(pos):
        write_pgm(img, out / "positives" / f"pos_{i:03d}.pgm")
    for i, img in enumerate(neg):
        write_pgm(img, out / "negatives" / f"neg_{i:03d}.pgm")
    for name, img in synthetic.demo_faces().items():
        write_pgm(img, out / "faces" / f"{name}.pgm")
    synthetic.write_corpus(out / "corpus", size=args.corpus_size)
    print(f"fixtures written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"key = value config file (default: ${CONFIG_ENV})")
    common.add_argument("--store", dest="store_path")
    common.add_argument("--model", dest="model_path")
    common.add_argument("--threshold", dest="auth_threshold", type=float,
                        help="cosine similarity needed to authenticate")
    common.add_argument("--detect-threshold", dest="detect_threshold", type=float)
    common.add_argument("--nms-iou", dest="nms_iou", type=float)

    key_opts = argparse.ArgumentParser(add_help=False)
    key_opts.add_argument("--hardened-key", action="store_true",
                          help="SHA-256 the full encoding instead of truncating its rendering")

    p = argparse.ArgumentParser(prog="biocrypt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", parents=[common], help="train the window classifier")
    s.add_argument("positives")
    s.add_argument("negatives")
    s.add_argument("--out")
    s.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    s.add_argument("--epochs", type=int, default=30)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("enroll", parents=[common], help="store a face template")
    s.add_argument("username")
    s.add_argument("image")
    s.set_defaults(func=cmd_enroll)

    s = sub.add_parser("auth", parents=[common], help="check a live image against a template")
    s.add_argument("username")
    s.add_argument("image")
    s.set_defaults(func=cmd_auth)

    for name, func in (("encrypt", cmd_encrypt), ("decrypt", cmd_decrypt)):
        s = sub.add_parser(name, parents=[common, key_opts], help=f"{name} a file after authenticating")
        s.add_argument("username")
        s.add_argument("live")
        s.add_argument("input")
        s.add_argument("output", nargs="?")
        s.add_argument("--standard-padding", action="store_true",
                       help="PKCS#7 padding instead of null padding (lossless, not interoperable)")
        s.set_defaults(func=func)

    s = sub.add_parser("analyze", parents=[common, key_opts], help="cipher quality report (CSV)")
    s.add_argument("corpus")
    s.add_argument("report")
    s.add_argument("--key-hex")
    s.add_argument("--key-file")
    s.add_argument("--user")
    s.add_argument("--live")
    s.add_argument("--iv", dest="analyze_iv")
    s.add_argument("--fraction", dest="perturb_fraction", type=float)
    s.add_argument("--seed", dest="perturb_seed", type=int)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", parents=[common], help="write demo fixtures")
    s.add_argument("outdir")
    s.add_argument("--corpus-size", type=int, default=64 * 1024)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
