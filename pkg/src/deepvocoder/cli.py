"""Batch command line: corpus training, encoding, decoding, evaluation.

Exit codes: 0 success, 1 usage, 2 data/format problems, 3 training failure.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import warnings
import zlib
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .bitstream import read_container, write_container
from .codec import (CodecMode, assemble_superframes, decode_stream, encode_stream,
                    mode_for_rate, mode_for_tag)
from .dae import TrainConfig, finetune_backprop, load_model, model_to_bytes, pretrain_rbm_stack
from .dsp import FrameConfig, frame_signal, log_magnitude
from .errors import ConfigError, FormatError, InsufficientDataError, TrainingDiverged
from .metrics import MetricReport, fwseg_snr, log_spectral_distortion, stoi_score
from .vq import (LbgConfig, SearchConfig, SplitCodebook, codebook_to_bytes, load_codebook,
                 train_lbg)

_DEFAULT_HIDDEN = (256, 256, 128, 128)


def default_architecture(mode: CodecMode, n_bins: int = 129) -> list:
    """Desk-scale palindromic layout around the mode's latent width."""
    inner = list(_DEFAULT_HIDDEN)
    return [n_bins * mode.T] + inner + [mode.K] + inner[::-1] + [n_bins * mode.T]


def read_wav(path, expected_rate: int = 8000) -> np.ndarray:
    """Load a 16-bit mono PCM WAV as floats in [-1, 1); rejects anything else."""
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise FormatError(f"{path}: not a readable WAV file ({exc})") from exc
    if data.ndim != 1:
        raise FormatError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype != np.int16:
        raise FormatError(f"{path}: expected 16-bit PCM samples, got {data.dtype}")
    if rate != expected_rate:
        raise FormatError(f"{path}: expected {expected_rate} Hz sample rate, got {rate}")
    return data.astype(np.float64) / 32768.0


def _wav_bytes(samples, rate: int = 8000) -> bytes:
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype(np.int16)
    buf = io.BytesIO()
    wavfile.write(buf, rate, pcm)
    return buf.getvalue()


def _write_atomic(path, data: bytes) -> None:
    """Write via a temp file and rename, so failures never leave partial output."""
    path = str(path)
    tmp = path + ".tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _file_crc(path) -> int:
    with open(path, "rb") as fh:
        return zlib.crc32(fh.read()) & 0xFFFFFFFF


def _corpus_superframes(corpus_dir, mode: CodecMode, cfg: FrameConfig) -> np.ndarray:
    paths = sorted(Path(corpus_dir).glob("*.wav"))
    if not paths:
        raise InsufficientDataError(f"no WAV files found in {corpus_dir}")
    chunks = []
    for p in paths:
        x = read_wav(p, cfg.sample_rate)
        spectra = log_magnitude(frame_signal(x, cfg).frames, cfg)
        chunks.append(assemble_superframes(spectra, mode.T))
    return np.vstack(chunks)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        minibatch=args.minibatch,
        pretrain_lr=args.pretrain_lr,
        pretrain_momentum=args.pretrain_momentum,
        pretrain_epochs=args.pretrain_epochs,
        finetune_lr_initial=args.lr,
        finetune_lr_decrement=args.lr_decrement,
        finetune_momentum=args.momentum,
        finetune_epochs=args.epochs,
        rng_seed=args.seed,
        skip_pretrain=args.skip_pretrain,
    )


def cmd_train_dae(args) -> int:
    mode = mode_for_rate(args.mode)
    cfg = FrameConfig()
    data = _corpus_superframes(args.corpus, mode, cfg)
    arch = args.arch or default_architecture(mode, cfg.n_bins)
    if arch[0] != cfg.n_bins * mode.T or arch[len(arch) // 2] != mode.K:
        raise ConfigError(
            f"architecture {arch} does not fit mode {mode.rate} bit/s "
            f"(input {cfg.n_bins * mode.T}, coding layer {mode.K})"
        )
    print(f"corpus: {data.shape[0]} super-frames of dim {data.shape[1]}")

    feat_min = data.min(axis=0)
    feat_max = data.max(axis=0)
    flat = feat_max - feat_min < 1e-6  # constant dims would break the affine map
    feat_max[flat] = feat_min[flat] + 1e-6
    tc = _train_config(args)
    normalized = np.clip((data - feat_min) / (feat_max - feat_min), 0.0, 1.0)
    model = pretrain_rbm_stack(normalized, tc, arch, feat_min, feat_max)
    model, trace = finetune_backprop(model, normalized, tc)
    for epoch, loss in enumerate(trace):
        print(f"epoch {epoch + 1} loss {loss:.6f}")
    _write_atomic(args.output, model_to_bytes(model))
    print(f"wrote {args.output}")
    return 0


def cmd_train_codebook(args) -> int:
    mode = mode_for_rate(args.mode)
    cfg = FrameConfig()
    model = load_model(args.model)
    if model.input_dim != cfg.n_bins * mode.T or model.latent_dim != mode.K:
        raise ConfigError(
            f"model ({model.input_dim}->{model.latent_dim}) does not match "
            f"mode {mode.rate} bit/s ({cfg.n_bins * mode.T}->{mode.K})"
        )
    data = _corpus_superframes(args.corpus, mode, cfg)
    latents = model.encode(data)
    need = max(1 << b for b in mode.bits)
    if latents.shape[0] < need:
        raise InsufficientDataError(
            f"corpus yields {latents.shape[0]} latent vectors but the largest "
            f"sub-codebook needs at least {need}"
        )
    print(f"training {mode.D} sub-codebooks on {latents.shape[0]} latent vectors")
    lbg = LbgConfig(
        split_perturbation=args.lbg_perturbation,
        max_iters=args.lbg_iters,
        rel_tol=args.lbg_tol,
        rng_seed=args.seed,
    )
    subdim = mode.K // mode.D
    splits = []
    for d in range(mode.D):
        book = train_lbg(latents[:, d * subdim : (d + 1) * subdim], mode.bits[d], lbg)
        # reseeded cells can overshoot [0,1] by the split perturbation
        splits.append(np.clip(book, 0.0, 1.0))
        print(f"  split {d}: {book.shape[0]} codewords")
    cb = SplitCodebook(splits, mode.bits)
    _write_atomic(args.output, codebook_to_bytes(cb))
    print(f"wrote {args.output}")
    return 0


def cmd_encode(args) -> int:
    mode = mode_for_rate(args.mode)
    samples = read_wav(args.input)
    model = load_model(args.model)
    codebook = load_codebook(args.codebook)
    enc = encode_stream(
        samples, model, codebook, mode,
        search=SearchConfig(J=args.j),
        model_crc=_file_crc(args.model),
        codebook_crc=_file_crc(args.codebook),
    )
    blob = write_container(enc)
    _write_atomic(args.output, blob)
    duration = enc.original_len / enc.sample_rate
    rate = 8.0 * len(enc.payload) / duration
    print(f"wrote {args.output}: {len(blob)} bytes, payload {rate:.1f} bit/s")
    return 0


def cmd_decode(args) -> int:
    with open(args.input, "rb") as fh:
        enc = read_container(fh.read())
    model = load_model(args.model)
    codebook = load_codebook(args.codebook)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        samples = decode_stream(
            enc, model, codebook, gl_iters=args.gl_iters,
            model_crc=_file_crc(args.model),
            codebook_crc=_file_crc(args.codebook),
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write_atomic(args.output, _wav_bytes(samples, enc.sample_rate))
    print(f"wrote {args.output}: {samples.size} samples")
    return 0


def cmd_evaluate(args) -> int:
    ref_dir, test_dir = Path(args.ref_dir), Path(args.test_dir)
    ref_names = {p.name for p in ref_dir.glob("*.wav")}
    test_names = {p.name for p in test_dir.glob("*.wav")}
    orphans = sorted(ref_names ^ test_names)
    if orphans:
        for name in orphans:
            side = "test" if name in ref_names else "reference"
            print(f"error: {name} has no {side} counterpart", file=sys.stderr)
        return 2
    if not ref_names:
        raise InsufficientDataError(f"no WAV files found in {ref_dir}")

    cfg = FrameConfig()
    rows = []
    for name in sorted(ref_names):
        ref = read_wav(ref_dir / name, cfg.sample_rate)
        test = read_wav(test_dir / name, cfg.sample_rate)
        n = min(ref.size, test.size)
        ref, test = ref[:n], test[:n]
        lsd = log_spectral_distortion(
            log_magnitude(frame_signal(ref, cfg).frames, cfg),
            log_magnitude(frame_signal(test, cfg).frames, cfg),
        )
        rows.append((name, lsd, fwseg_snr(ref, test, cfg),
                     stoi_score(ref, test, cfg.sample_rate)))

    reports = [MetricReport.from_values([r[i] for r in rows]) for i in (1, 2, 3)]
    lines = ["utterance,lsd_db,fwsegsnr_db,stoi"]
    lines += [f"{name},{lsd:.4f},{snr:.4f},{st:.4f}" for name, lsd, snr, st in rows]
    lines.append("mean±std," + ",".join(f"{r.mean:.4f}±{r.std:.4f}" for r in reports))
    text = "\n".join(lines)
    print(text)
    print("note: PESQ is not included (licensed algorithm)", file=sys.stderr)
    if args.output:
        _write_atomic(args.output, (text + "\n").encode())
    return 0


def cmd_info(args) -> int:
    with open(args.input, "rb") as fh:
        enc = read_container(fh.read())
    mode = mode_for_tag(enc.mode_tag)
    duration = enc.original_len / enc.sample_rate if enc.sample_rate else 0.0
    payload_rate = 8.0 * len(enc.payload) / duration if duration else float("nan")
    print(f"file: {args.input}")
    print(f"mode: {mode.rate} bit/s, T={mode.T}, {mode.bits_per_frame} bits/frame")
    print(f"sample rate: {enc.sample_rate} Hz")
    print(f"super-frames: {enc.superframe_count}")
    print(f"duration: {duration:.3f} s ({enc.original_len} samples)")
    print(f"payload: {len(enc.payload)} bytes ({payload_rate:.1f} bit/s)")
    print(f"model hash: {enc.model_hash:#010x}")
    print(f"codebook hash: {enc.codebook_hash:#010x}")
    return 0


def _arch_list(text: str) -> list:
    try:
        dims = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad architecture list {text!r}")
    return dims


def _add_train_flags(p):
    p.add_argument("--minibatch", type=int, default=512)
    p.add_argument("--pretrain-lr", type=float, default=1e-3)
    p.add_argument("--pretrain-momentum", type=float, default=0.99)
    p.add_argument("--pretrain-epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=1e-3, help="initial fine-tuning rate")
    p.add_argument("--lr-decrement", type=float, default=1e-4)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--epochs", type=int, default=1000, help="fine-tuning epochs")
    p.add_argument("--skip-pretrain", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepvocoder",
        description="Low bit rate speech codec: autoencoder spectra + AbS split VQ.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of flag defaults; flags win")
    common.add_argument("--seed", type=int, default=0, help="RNG seed")

    p = sub.add_parser("train-dae", parents=[common], help="train the autoencoder on a WAV corpus")
    p.add_argument("corpus", help="directory of 16-bit mono 8 kHz WAV files")
    p.add_argument("output", help="model file to write (DVAE)")
    p.add_argument("--mode", type=int, choices=(2400, 1200), default=2400)
    p.add_argument("--arch", type=_arch_list, default=None,
                   help="comma-separated palindromic layer dims")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train_dae)

    p = sub.add_parser("train-codebook", parents=[common],
                       help="train LBG split codebooks from model latents")
    p.add_argument("corpus")
    p.add_argument("model", help="trained DVAE model file")
    p.add_argument("output", help="codebook file to write (DVCB)")
    p.add_argument("--mode", type=int, choices=(2400, 1200), default=2400)
    p.add_argument("--lbg-perturbation", type=float, default=1e-3)
    p.add_argument("--lbg-iters", type=int, default=100)
    p.add_argument("--lbg-tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_train_codebook)

    p = sub.add_parser("encode", parents=[common], help="encode a WAV file to a DVOC stream")
    p.add_argument("input", help="16-bit mono 8 kHz WAV file")
    p.add_argument("output", help="container file to write (DVOC)")
    p.add_argument("--model", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--mode", type=int, choices=(2400, 1200), default=2400)
    p.add_argument("-j", "--j", type=int, default=3, help="candidates per split")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="decode a DVOC stream to WAV")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--model", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--gl-iters", type=int, default=100, help="Griffin-Lim iterations")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", parents=[common],
                       help="per-file quality metrics for paired directories")
    p.add_argument("ref_dir")
    p.add_argument("test_dir")
    p.add_argument("--output", default=None, help="also write the CSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("info", parents=[common], help="dump a DVOC header")
    p.add_argument("input")
    p.set_defaults(func=cmd_info)
    return parser


def _config_defaults(argv, parser):
    """Pre-scan for --config and install its JSON values as parser defaults,
    so explicit flags still win."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return
    with open(path) as fh:
        values = json.load(fh)
    if not isinstance(values, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    parser.set_defaults(**{k.replace("-", "_"): v for k, v in values.items()})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _config_defaults(argv, parser)
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return 0 if exc.code in (0, None) else 1
    except (FormatError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not hasattr(args, "func"):
        parser.print_usage(file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FormatError, ConfigError, InsufficientDataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
