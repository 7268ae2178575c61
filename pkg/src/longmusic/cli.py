"""Command-line entry point.

Exit codes: 0 success, 1 usage error (bad flag, missing file), 2 data error
(unreadable MIDI, token or checkpoint file, invalid config), 3 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .checkpoint import load_checkpoint
from .config import ConfigError, load_run_config, thread_limit
from .errors import CapacityError, ContractError, MidiParseError, PreconditionError, VocabularyError
from .events import VOCAB, decode_events, encode_events, read_token_file, window_dataset, write_token_file
from .midi import read_midi_file, write_midi_file

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3
MIDI_SUFFIXES = (".mid", ".midi")
TOKEN_SUFFIX = ".bbtk"

log = logging.getLogger("longmusic")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file or directory: {path}")
    return p


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _token_files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(path.glob(f"*{TOKEN_SUFFIX}"))
        if not files:
            raise DataError(f"no {TOKEN_SUFFIX} files in {path}")
        return files
    return [path]


def _read_tokens(paths: list[Path]) -> list[np.ndarray]:
    out = []
    for p in paths:
        try:
            out.append(read_token_file(p))
        except (OSError, ValueError) as exc:
            raise DataError(f"{p}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _tokenize_one(path: Path) -> tuple[str, np.ndarray | None, str]:
    try:
        ns = read_midi_file(path)
    except (MidiParseError, OSError) as exc:
        return path.name, None, str(exc)
    return path.name, encode_events(ns), "; ".join(ns.warnings)


def cmd_preprocess(args) -> int:
    src = _existing(args.input_dir)
    files = sorted(p for p in src.iterdir() if p.suffix.lower() in MIDI_SUFFIXES) if src.is_dir() else [src]
    if not files:
        raise DataError(f"no MIDI files in {src}")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_tokenize_one, files))  # map keeps filename order
    else:
        results = [_tokenize_one(p) for p in files]
    failed = 0
    total = 0
    for name, tokens, note in results:
        if tokens is None:
            failed += 1
            print(f"error: {name}: {note}", file=sys.stderr)
            continue
        if note:
            log.warning("%s: %s", name, note)
        write_token_file(out / (Path(name).stem + TOKEN_SUFFIX), tokens)
        total += len(tokens)
    print(f"{len(files) - failed}/{len(files)} files -> {out} ({total} tokens)")
    return EXIT_DATA if failed else EXIT_OK


def _split_train_val(rc) -> tuple[list[np.ndarray], list[np.ndarray]]:
    if rc.train_data is None:
        raise ConfigError("config needs train_data")
    train_files = _token_files(_existing(str(rc.train_data)))
    if rc.val_data is not None:
        val_files = _token_files(_existing(str(rc.val_data)))
    else:
        k = int(round(len(train_files) * rc.val_fraction))
        k = min(k, len(train_files) - 1)
        val_files = train_files[len(train_files) - k :] if k > 0 else []
        train_files = train_files[: len(train_files) - k]
    return _read_tokens(train_files), _read_tokens(val_files)


def cmd_train(args) -> int:
    from .training import train

    rc = load_run_config(_existing(args.config))
    if args.max_steps is not None:
        rc.train.max_steps = args.max_steps
    if args.output_dir:
        rc.output_dir = Path(args.output_dir)
    train_seqs, val_seqs = _split_train_val(rc)
    train_windows = window_dataset(train_seqs, rc.window, rc.stride)
    val_windows = window_dataset(val_seqs, rc.window) if val_seqs else None
    rc.output_dir.mkdir(parents=True, exist_ok=True)
    ckpt = rc.output_dir / "model.ckpt"
    with threadpool_limits(limits=thread_limit()):
        _, report = train(rc.train, train_windows, val_windows, checkpoint_path=ckpt, log_path=rc.output_dir / "train.jsonl")
    best = f"{report.best_val:.4f}" if math.isfinite(report.best_val) else "n/a"
    last = f"{report.train_nll[-1]:.4f}" if report.train_nll else "n/a"
    print(
        f"{rc.train.model.kind}/{rc.train.variant}: {report.steps} steps, stop={report.stop_reason}, "
        f"train NLL {last}, best val NLL {best}, checkpoint {ckpt}"
    )
    return EXIT_OK


def _load_model(path: str):
    try:
        return load_checkpoint(_existing(path))
    except (ValueError, KeyError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def cmd_eval(args) -> int:
    from .training import nll_stats

    model, _ = _load_model(args.checkpoint)
    seqs = []
    for t in args.tokens:
        seqs += _read_tokens(_token_files(_existing(t)))
    window = args.window or model.config.max_len + 1
    stats = nll_stats(model, window_dataset(seqs, window), args.batch_size)
    print(json.dumps({"nll": stats.nll, "tokens": stats.tokens, "window": window}))
    return EXIT_OK


def cmd_generate(args) -> int:
    from .generation import SamplerConfig, sample

    model, _ = _load_model(args.checkpoint)
    primer = None
    if args.primer:
        primer = tuple(int(x) for x in _read_tokens([_existing(args.primer)])[0][: args.primer_length])
    cfg = SamplerConfig(
        temperature=args.temperature,
        primer=primer,
        target_length=args.length,
        seed=args.seed,
        strategy="greedy" if args.greedy else "categorical",
    )
    tokens = sample(model, cfg)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    ns = decode_events(tokens)
    write_midi_file(ns, out)
    write_token_file(out.with_suffix(TOKEN_SUFFIX), tokens)
    print(f"{len(tokens)} tokens, {len(ns)} notes, {ns.total_seconds:.2f}s -> {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import bench_attention

    report = bench_attention(
        args.lengths,
        window=args.window,
        modes=tuple(args.modes.split(",")),
        heads=args.heads,
        head_dim=args.head_dim,
        trials=args.trials,
        backward=not args.forward_only,
        threads=args.threads,
    )
    print(report.table())
    if args.json == "-":
        print(report.to_jsonl())
    elif args.json:
        Path(args.json).write_text(report.to_jsonl() + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_all

    results = run_all(quick=args.quick, report=lambda r: print(r.line(), flush=True))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="longmusic", description="Long-sequence music models: preprocessing, training, sampling, benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("preprocess", help="MIDI directory -> token files")
    s.add_argument("input_dir")
    s.add_argument("output_dir")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train", help="train one model from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--output-dir")
    s.add_argument("--max-steps", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="mean per-token NLL of a checkpoint on token files")
    s.add_argument("checkpoint")
    s.add_argument("tokens", nargs="+", help="token files or directories")
    s.add_argument("--window", type=int, help="default: max_len + 1")
    s.add_argument("--batch-size", type=int, default=8)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("generate", help="sample a piece; writes .mid and .bbtk")
    s.add_argument("checkpoint")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--length", type=int, default=512)
    s.add_argument("--temperature", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--greedy", action="store_true")
    s.add_argument("--primer", help="token file whose prefix primes the model")
    s.add_argument("--primer-length", type=int, default=64)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("bench", help="attention scaling benchmark (kernel level)")
    s.add_argument("--lengths", type=_int_list, default=[256, 512, 1024, 2048, 4096])
    s.add_argument("--window", type=int, default=64)
    s.add_argument("--heads", type=int, default=1)
    s.add_argument("--head-dim", type=int, default=64)
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--modes", default="dense_causal,sliding_window")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--forward-only", action="store_true")
    s.add_argument("--json", help="write JSONL records here ('-' for stdout)")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("verify", help="hermetic oracle, gradient, early-stop and init checks")
    s.add_argument("--quick", action="store_true", help="sample model gradient entries")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigError, MidiParseError, VocabularyError, CapacityError, PreconditionError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
