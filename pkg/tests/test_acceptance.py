"""Acceptance criteria, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line, printed in the pytest summary
(and directly when run as ``python tests/test_acceptance.py``).
Criterion 5c is soft: it reports a recorded or freshly run ordering
experiment but never fails the suite.  Set ``LONGMUSIC_ORDERING=1`` to rerun
it (about 30 minutes).
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from longmusic import tensor as T
from longmusic.bench import bench_attention, loglog_slope
from longmusic.checkpoint import dumps_checkpoint, loads_checkpoint
from longmusic.events import VOCAB, decode_events, encode_events, window_dataset
from longmusic.init import init_parameters
from longmusic.midi import parse_midi, write_midi
from longmusic.model import LstmConfig, ModelConfig, build_model
from longmusic.training import TrainConfig, evaluate_nll, train
from longmusic.verify import (
    check_early_stopping,
    check_gradients,
    check_initialisation,
    check_relative_oracle,
    check_sliding_window_oracle,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "data" / "corpus"
ORDERING_RESULTS = ROOT / "results" / "ordering.json"


def record(criterion: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def corpus_files() -> list[Path]:
    files = sorted(CORPUS.glob("*.mid"))
    if not files:
        pytest.skip("corpus not present")
    return files


def test_criterion_1_sliding_window_oracle():
    t0 = time.perf_counter()
    r = check_sliding_window_oracle()
    elapsed = time.perf_counter() - t0
    ok = r.passed and elapsed < 60
    record("1", ok, f"{r.detail}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_relative_oracle():
    r = check_relative_oracle(seeds=20, max_n=64)
    record("2", r.passed, r.detail)
    assert r.passed


def test_criterion_3_gradients():
    t0 = time.perf_counter()
    results = check_gradients(max_entries=None, seeds=5)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in results) and elapsed < 300
    record("3", ok, "; ".join(f"{r.name.split(' vs')[0]}: {r.detail}" for r in results) + f"; {elapsed:.0f}s")
    assert ok


@pytest.fixture(scope="module")
def scaling_report():
    return bench_attention([256, 512, 1024, 2048, 4096], window=64, heads=1, head_dim=64, trials=5)


def test_criterion_4_complexity(scaling_report):
    rep = scaling_report
    lengths = [256, 512, 1024, 2048, 4096]
    dense_mac_slope = rep.mac_slopes["dense_causal"]
    window_mac_slope = rep.mac_slopes["sliding_window"]
    window_ratios = [
        rep.row("sliding_window", b).macs / rep.row("sliding_window", a).macs for a, b in zip(lengths, lengths[1:])
    ]
    macs_ok = (
        abs(dense_mac_slope - 2.0) <= 0.10
        and abs(window_mac_slope - 1.0) <= 0.05
        and all(abs(r - 2.0) <= 0.10 for r in window_ratios)
        and all(r.macs == r.macs_analytic for r in rep.rows)
    )
    ws, ds = rep.time_slopes["sliding_window"], rep.time_slopes["dense_causal"]
    slopes_ok = ws < 1.4 and ds > 1.7

    speed = bench_attention([1024], window=128, heads=1, head_dim=64, trials=5)
    reduction = speed.speedup[1024]["forward_backward_reduction"]
    speed_ok = reduction >= 0.25

    ok = macs_ok and slopes_ok and speed_ok
    record(
        "4",
        ok,
        f"MAC slopes dense {dense_mac_slope:.3f} / windowed {window_mac_slope:.3f} "
        f"(doubling ratios {', '.join(f'{r:.3f}' for r in window_ratios)}); "
        f"time slopes windowed {ws:.2f} (<1.4), dense {ds:.2f} (>1.7); "
        f"n=1024 w=128 fwd+bwd {reduction:.1%} faster (>=25%, kernel-level)",
    )
    assert ok


def test_criterion_5a_untrained_nll():
    seqs = [encode_events(parse_midi(p.read_bytes())) for p in corpus_files()[:20]]
    val = window_dataset(seqs, 257)[:32]
    target = math.log(VOCAB.size)
    details, ok = [], True
    cfgs = {
        "relative": ModelConfig(max_len=256),
        "sliding_window": ModelConfig(max_len=256, attention_mode="sliding_window"),
        "lstm": LstmConfig(max_len=256),
    }
    for name, cfg in cfgs.items():
        nll = evaluate_nll(build_model(cfg, seed=0), val)
        ok &= abs(nll - target) <= 0.05
        details.append(f"{name} {nll:.4f}")
    record("5a", ok, f"ln(390) = {target:.4f}; " + ", ".join(details) + " (tol 0.05)")
    assert ok


def test_criterion_5b_overfit_single_window():
    tokens = encode_events(parse_midi(corpus_files()[0].read_bytes()))
    if len(tokens) < 513:
        tokens = np.concatenate([tokens, encode_events(parse_midi(corpus_files()[1].read_bytes()))[1:]])
    window = [tokens[:513]]
    common = dict(d_model=64, num_layers=2, num_heads=4, ff_dim=256, max_len=512, dropout_p=0.0)
    cells = {
        "relative": (ModelConfig(attention_mode="relative", **common), 3e-3),
        "sliding_window": (ModelConfig(attention_mode="sliding_window", attention_window=64, **common), 3e-3),
        "lstm": (LstmConfig(embed_dim=64, hidden_dim=128, num_layers=1, dropout_p=0.0, max_len=512), 1e-2),
    }
    details, ok = [], True
    for name, (mcfg, lr) in cells.items():
        cfg = TrainConfig(mcfg, lr=lr, batch_size=1, max_steps=2000, use_xavier_init=True)
        _, rep = train(cfg, window, stop_below=0.5)
        final = rep.train_nll[-1]
        ok &= final < 0.5
        details.append(f"{name} {final:.3f} after {rep.steps} steps")
    record("5b", ok, "; ".join(details) + " (target < 0.5 within 2000 steps)")
    assert ok


def test_criterion_5c_ordering_soft():
    if os.environ.get("LONGMUSIC_ORDERING") == "1":
        subprocess.run([sys.executable, str(ROOT / "scripts" / "ordering_experiment.py")], check=True)
    if not ORDERING_RESULTS.exists():
        record("5c", False, "soft, not run (set LONGMUSIC_ORDERING=1); never fails the suite")
        return
    res = json.loads(ORDERING_RESULTS.read_text())
    nll = {k: v["val_nll"] for k, v in res["models"].items()}
    record(
        "5c",
        res["ordering_holds"],
        f"soft, recorded run on {res['corpus_minutes']} min of music, {res['budget_minutes']} min per model: "
        f"val NLL relative {nll['relative']:.3f}, sliding_window {nll['sliding_window']:.3f}, lstm {nll['lstm']:.3f}",
    )


def test_criterion_6_early_stopping():
    r = check_early_stopping(sequences=200)
    record("6", r.passed, r.detail)
    assert r.passed


def test_criterion_7_initialisation():
    results = check_initialisation()
    ok = all(r.passed for r in results)
    record("7", ok, "; ".join(f"{r.name}: {r.detail}" for r in results))
    assert ok


def test_criterion_8_midi_round_trip():
    worst_onset = worst_dur = worst_tick = 0.0
    problems = []
    files = corpus_files()
    for path in files:
        ns = parse_midi(path.read_bytes())
        back = decode_events(encode_events(ns))
        if len(back) != len(ns):
            problems.append(f"{path.name}: {len(ns)} notes -> {len(back)}")
            continue
        key = lambda n: (n.pitch, n.start)  # noqa: E731
        for a, b in zip(sorted(ns.notes, key=key), sorted(back.notes, key=key)):
            if a.pitch != b.pitch:
                problems.append(f"{path.name}: pitch mismatch")
                break
            worst_onset = max(worst_onset, abs(a.start - b.start))
            worst_dur = max(worst_dur, abs(a.duration - b.duration))
        rewritten = parse_midi(write_midi(ns))
        tick = 60 / 120 / 480  # seconds per tick of the written file
        for a, b in zip(sorted(ns.notes, key=key), sorted(rewritten.notes, key=key)):
            worst_tick = max(worst_tick, abs(a.start - b.start) / tick, abs(a.end - b.end) / tick)
        if len(rewritten) != len(ns):
            problems.append(f"{path.name}: write/parse changed note count")
    ok = not problems and worst_onset <= 0.010 + 1e-9 and worst_dur <= 0.020 + 1e-9 and worst_tick <= 1.0 + 1e-6
    record(
        "8",
        ok,
        f"{len(files)} files; worst onset {worst_onset * 1000:.2f} ms (<=10), duration {worst_dur * 1000:.2f} ms (<=20), "
        f"write->parse {worst_tick:.2f} tick (<=1)" + (f"; {problems[:3]}" if problems else ""),
    )
    assert ok


def test_criterion_9_checkpoint_and_verify():
    mismatched = []
    for kind in ("relative", "sliding_window", "dense_causal", "lstm"):
        cfg = LstmConfig(max_len=128) if kind == "lstm" else ModelConfig(max_len=128, attention_mode=kind)
        model = build_model(cfg, seed=1)
        init_parameters(model, "xavier_split", 1)
        model.eval()
        tokens = np.random.default_rng(1).integers(0, 388, (2, 128))
        loaded, _ = loads_checkpoint(dumps_checkpoint(model, step=5))
        if model(tokens).data.tobytes() != loaded(tokens).data.tobytes():
            mismatched.append(kind)
    proc = subprocess.run(
        [sys.executable, "-m", "longmusic", "verify"],
        capture_output=True, text=True, cwd="/", env={**os.environ, "PYTHONHASHSEED": "0"},
    )
    ok = not mismatched and proc.returncode == 0
    record(
        "9",
        ok,
        f"checkpoint forward outputs bit-exact for 4 model kinds{'' if not mismatched else f' except {mismatched}'}; "
        f"`verify` exit code {proc.returncode} ({proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else 'no output'})",
    )
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
