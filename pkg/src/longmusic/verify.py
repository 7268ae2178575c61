"""Hermetic verification suites (synthetic inputs only, no corpus, no network).

Each suite returns a list of :class:`CheckResult`.  ``run_all`` is what the
``verify`` subcommand executes.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .attention import (
    AttentionConfig,
    DenseFallbackWarning,
    RelativeEmbeddings,
    band_mask_oracle,
    chunk_overlapping,
    dense_causal_attention,
    masked_dense_attention,
    relative_attention,
    skew,
    sliding_window_attention,
)
from .init import init_parameters, xavier_bound
from .layers import INPUT_EMBEDDING, WEIGHT, Embedding, Linear
from .model import LstmConfig, LstmModel, ModelConfig, MusicTransformer
from .oracles import relative_attention_loop
from .training import EarlyStopState, early_stop_update

ORACLE_TOL_32 = 1e-5
GRAD_TOL = 1e-4
FD_STEP = 1e-5
PATIENCE = 200


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


# ---------------------------------------------------------------------------
# 1. sliding window == dense attention under the band mask
# ---------------------------------------------------------------------------

def sliding_window_grid():
    for n in (16, 32, 64, 128, 256):
        for w in (2, 4, 8, 16, 64):
            if w > n:
                continue
            for heads in (1, 4):
                for dilation in (1, 2):
                    for causal in (True, False):
                        yield n, w, heads, dilation, causal


def check_sliding_window_oracle(head_dim: int = 16, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    cases = 0
    with T.precision("float32"), warnings.catch_warnings():
        warnings.simplefilter("ignore", DenseFallbackWarning)
        for n, w, heads, dilation, causal in sliding_window_grid():
            q, k, v = (T.Tensor(rng.standard_normal((heads, n, head_dim))) for _ in range(3))
            cfg = AttentionConfig(heads, head_dim, "sliding_window", w, dilation, causal=causal)
            got = sliding_window_attention(q, k, v, cfg).data
            ref = masked_dense_attention(q, k, v, band_mask_oracle(n, w, dilation, causal)).data
            worst = max(worst, float(np.abs(got - ref).max()))
            cases += 1
    return CheckResult(
        "sliding-window == banded dense oracle (float32)",
        worst <= ORACLE_TOL_32,
        f"{cases} cases, max |diff| = {worst:.2e} (tol {ORACLE_TOL_32:.0e})",
    )


# ---------------------------------------------------------------------------
# 2. relative attention == per-pair loop oracle
# ---------------------------------------------------------------------------

def check_relative_oracle(seeds: int = 20, max_n: int = 64) -> CheckResult:
    lengths = (1, 2, 5, 8, 16, 31, 48, max_n)
    worst = 0.0
    with T.precision("float32"):
        for seed in range(seeds):
            rng = np.random.default_rng(1000 + seed)
            n = lengths[seed % len(lengths)]
            heads, s = 2, 4 + 4 * (seed % 2)
            q, k, v = (rng.standard_normal((heads, n, s)).astype(np.float32) for _ in range(3))
            table = rng.standard_normal((max_n + 3, s)).astype(np.float32)
            cfg = AttentionConfig(heads, s, "relative")
            got = relative_attention(T.Tensor(q), T.Tensor(k), T.Tensor(v), RelativeEmbeddings(T.Tensor(table)), cfg).data
            ref = relative_attention_loop(q, k, v, table)
            worst = max(worst, float(np.abs(got - ref).max()))
    return CheckResult(
        "relative attention == O(n^2) loop oracle",
        worst <= ORACLE_TOL_32,
        f"{seeds} seeds, n <= {max_n}, max |diff| = {worst:.2e} (tol {ORACLE_TOL_32:.0e})",
    )


# ---------------------------------------------------------------------------
# 3. finite-difference gradient checks
# ---------------------------------------------------------------------------

def _op_cases(rng: np.random.Generator) -> dict[str, tuple[Callable, dict]]:
    """name -> (loss builder, parameters); every loss is a weighted sum of the op output."""

    def p(*shape, positive=False):
        x = rng.standard_normal(shape)
        return T.parameter(np.abs(x) + 0.5 if positive else x)

    def weighted(out: T.Tensor, seed: int) -> T.Tensor:
        w = np.random.default_rng(seed).standard_normal(out.shape)
        return T.mul(out, T.Tensor(w)).sum()

    a, b = p(3, 4), p(3, 4)
    m1, m2 = p(2, 3, 5), p(5, 4)
    pos = p(3, 4, positive=True)
    x4 = p(2, 3, 4)
    xs = p(2, 6)
    ln_x, gamma, beta = p(3, 8), p(8), p(8)
    emb = p(10, 4)
    idx = rng.integers(0, 10, size=(2, 5))
    idx[0, 0] = idx[1, 1]  # repeated index exercises gradient accumulation
    logits = p(4, 7)
    targets = rng.integers(0, 7, size=4)
    targets_ignored = targets.copy()
    targets_ignored[1] = 6
    gates, w_hh = p(2, 5, 12), p(3, 12)
    mask = rng.random((2, 6)) > 0.3
    mask[:, 0] = True
    q, k, v = p(2, 8, 4), p(2, 8, 4), p(2, 8, 4)
    rel_table = p(10, 4)
    chunk_x = p(2, 8, 3)
    skew_x = p(2, 5, 5)
    diamond = p(3, 3)
    cfg_dense = AttentionConfig(2, 4, "dense_causal")
    cfg_rel = AttentionConfig(2, 4, "relative")
    cfg_win = AttentionConfig(2, 4, "sliding_window", attention_window=4)
    cfg_win_dil = AttentionConfig(2, 4, "sliding_window", attention_window=4, dilation=2, causal=False)
    cfg_drop = AttentionConfig(2, 4, "sliding_window", attention_window=4, dropout_p=0.3)

    def shared_diamond():
        h = T.tanh(diamond)
        return weighted(T.mul(T.exp(h * 0.5), h + T.sigmoid(h)), 2)

    return {
        "add": (lambda: weighted(a + b, 1), {"a": a, "b": b}),
        "sub_broadcast": (lambda: weighted(a - b[0:1], 1), {"a": a, "b": b}),
        "mul": (lambda: weighted(a * b, 1), {"a": a, "b": b}),
        "div": (lambda: weighted(a / pos, 1), {"a": a, "pos": pos}),
        "pow": (lambda: weighted(pos ** 1.5, 1), {"pos": pos}),
        "exp": (lambda: weighted(T.exp(a), 1), {"a": a}),
        "log": (lambda: weighted(T.log(pos), 1), {"pos": pos}),
        "tanh": (lambda: weighted(T.tanh(a), 1), {"a": a}),
        "sigmoid": (lambda: weighted(T.sigmoid(a), 1), {"a": a}),
        "relu": (lambda: weighted(T.relu(a), 1), {"a": a}),
        "matmul_broadcast": (lambda: weighted(T.matmul(m1, m2), 1), {"m1": m1, "m2": m2}),
        "sum_axis": (lambda: weighted(x4.sum(axis=1), 1), {"x": x4}),
        "mean": (lambda: weighted(x4.mean(axis=-1, keepdims=True), 1), {"x": x4}),
        "reshape_transpose": (lambda: weighted(x4.reshape(4, 6).transpose(), 1), {"x": x4}),
        "getitem_fancy": (lambda: weighted(x4[:, [0, 2, 2]], 1), {"x": x4}),
        "concat_pad": (lambda: weighted(T.pad(T.concat([a, b], axis=1), [(1, 0), (0, 2)]), 1), {"a": a, "b": b}),
        "masked_fill": (lambda: weighted(T.masked_fill(xs, ~mask, 0.0), 1), {"x": xs}),
        "masked_softmax": (lambda: weighted(T.masked_softmax(xs, mask), 1), {"x": xs}),
        "log_softmax": (lambda: weighted(T.log_softmax(xs), 1), {"x": xs}),
        "cross_entropy": (lambda: T.cross_entropy(logits, targets), {"logits": logits}),
        "cross_entropy_ignore": (lambda: T.cross_entropy(logits, targets_ignored, ignore_index=6), {"logits": logits}),
        "layer_norm": (lambda: weighted(T.layer_norm(ln_x, gamma, beta), 1), {"x": ln_x, "gamma": gamma, "beta": beta}),
        "embedding": (lambda: weighted(T.embedding(emb, idx), 1), {"weight": emb}),
        "dropout_fixed_mask": (lambda: weighted(T.dropout(a, 0.4, np.random.default_rng(7)), 1), {"a": a}),
        "lstm_recurrence": (lambda: weighted(T.lstm_recurrence(gates, w_hh), 1), {"gates": gates, "w_hh": w_hh}),
        "diamond_graph": (shared_diamond, {"x": diamond}),
        "chunk_overlapping": (lambda: weighted(chunk_overlapping(chunk_x, 4), 1), {"x": chunk_x}),
        "skew": (lambda: weighted(skew(skew_x), 1), {"x": skew_x}),
        "dense_causal_attention": (lambda: weighted(dense_causal_attention(q, k, v, cfg_dense), 1), {"q": q, "k": k, "v": v}),
        "relative_attention": (
            lambda: weighted(relative_attention(q, k, v, RelativeEmbeddings(rel_table), cfg_rel), 1),
            {"q": q, "k": k, "v": v, "E_rel": rel_table},
        ),
        "sliding_window_attention": (lambda: weighted(sliding_window_attention(q, k, v, cfg_win), 1), {"q": q, "k": k, "v": v}),
        "sliding_window_dilated": (lambda: weighted(sliding_window_attention(q, k, v, cfg_win_dil), 1), {"q": q, "k": k, "v": v}),
        "sliding_window_dropout": (
            lambda: weighted(sliding_window_attention(q, k, v, cfg_drop, np.random.default_rng(3), training=True), 1),
            {"q": q, "k": k, "v": v},
        ),
    }


def op_gradchecks(seed: int = 0) -> dict[str, T.GradCheckReport]:
    with T.precision("float64"):
        rng = np.random.default_rng(seed)
        return {name: T.gradcheck(fn, params, h=FD_STEP) for name, (fn, params) in _op_cases(rng).items()}


def model_gradcheck(kind: str, max_entries: int | None = None, seed: int = 0) -> T.GradCheckReport:
    """End-to-end check on a 2-layer, d_model=16, n=8 model (``kind`` = attention mode or ``lstm``)."""
    with T.precision("float64"):
        vocab = 24
        if kind == "lstm":
            model = LstmModel(LstmConfig(vocab_size=vocab, embed_dim=16, hidden_dim=16, num_layers=2, dropout_p=0.0), seed)
        else:
            cfg = ModelConfig(
                vocab_size=vocab, d_model=16, num_layers=2, num_heads=2, ff_dim=32, max_len=8,
                attention_mode=kind, attention_window=4, dropout_p=0.0,
            )
            model = MusicTransformer(cfg, seed)
        init_parameters(model, "xavier_split", seed)
        tokens = np.random.default_rng(seed).integers(0, vocab, size=(2, 9))

        def loss():
            return T.cross_entropy(model(tokens[:, :-1]), tokens[:, 1:])

        return T.gradcheck(loss, dict(model.named_parameters()), h=FD_STEP, max_entries=max_entries, seed=seed)


def check_gradients(max_entries: int | None = None, seeds: int = 5) -> list[CheckResult]:
    results = []
    worst: dict[str, float] = {}
    for seed in range(seeds):
        for name, rep in op_gradchecks(seed).items():
            worst[name] = max(worst.get(name, 0.0), rep.max_rel_error)
    bad = {k: v for k, v in worst.items() if v > GRAD_TOL}
    results.append(CheckResult(
        f"op gradients vs central differences ({len(worst)} ops x {seeds} seeds, float64)",
        not bad,
        f"max rel err {max(worst.values()):.2e}" + (f"; failing: {bad}" if bad else ""),
    ))
    for kind in ("dense_causal", "relative", "sliding_window", "lstm"):
        rep = model_gradcheck(kind, max_entries)
        results.append(CheckResult(
            f"2-layer {kind} model gradients vs central differences",
            rep.passed(GRAD_TOL),
            f"max rel err {rep.max_rel_error:.2e} over {len(rep.per_parameter_errors)} tensors",
        ))
    return results


# ---------------------------------------------------------------------------
# 6. early stopping state machine
# ---------------------------------------------------------------------------

def first_stop_index_oracle(losses, patience: int) -> int | None:
    """Index at which ``patience`` consecutive non-improvements have accumulated, by rescanning."""
    for t in range(len(losses)):
        best = math.inf
        last_improvement = -1
        for u in range(t + 1):
            if losses[u] < best:
                best = losses[u]
                last_improvement = u
        if t - last_improvement >= patience:
            return t
    return None


def run_early_stop(losses, patience: int) -> int | None:
    state = EarlyStopState()
    for t, value in enumerate(losses):
        state = early_stop_update(state, value, patience)
        if state.stopped:
            return t
    return None


def check_early_stopping(sequences: int = 60, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    problems = []
    for case in range(sequences):
        length = int(rng.integers(150, 700))
        style = case % 3
        if style == 0:  # noisy downward trend that flattens out
            losses = 5 * np.exp(-np.arange(length) / rng.uniform(20, 200)) + rng.normal(0, 0.05, length)
        elif style == 1:  # plateau with ties
            losses = np.round(rng.uniform(1, 2, length), 1)
        else:  # improvement planted inside every window of PATIENCE steps
            losses = np.full(length, 10.0)
            level = 10.0
            t = 0
            while t < length:
                level -= rng.uniform(0.001, 0.1)
                losses[t] = level
                t += int(rng.integers(1, PATIENCE))
        losses = [float(x) for x in losses]
        got = run_early_stop(losses, PATIENCE)
        want = first_stop_index_oracle(losses, PATIENCE)
        if got != want:
            problems.append(f"case {case}: stopped at {got}, oracle {want}")
        if style == 2 and got is not None:
            problems.append(f"case {case}: stopped despite an improvement in every window")

    flat = run_early_stop([1.0] + [1.0] * PATIENCE, PATIENCE)
    if flat != PATIENCE:
        problems.append(f"{PATIENCE} non-improvements after the first value stopped at index {flat}")
    return CheckResult(
        f"early stopping fires exactly at the {PATIENCE}th non-improvement",
        not problems,
        f"{sequences} random sequences" + (f"; {problems[:3]}" if problems else ", all match the rescanning oracle"),
    )


# ---------------------------------------------------------------------------
# 7. initialisation statistics
# ---------------------------------------------------------------------------

def check_initialisation(seed: int = 0) -> list[CheckResult]:
    results = []
    emb = Embedding(390, 256)
    init_parameters(emb, "xavier_split", seed)
    std = float(emb.weight.data.std())
    target = 256 ** -0.5
    results.append(CheckResult(
        "input embedding ~ N(0, d^-1/2)",
        abs(std - target) <= 0.1 * target and emb.weight.size >= 10_000,
        f"d=256, {emb.weight.size} entries, std {std:.5f} vs {target:.5f}",
    ))

    lin = Linear(512, 512)
    init_parameters(lin, "xavier_split", seed)
    bound = xavier_bound(512, 512)
    w = lin.weight.data
    uniform_std = bound / math.sqrt(3)
    results.append(CheckResult(
        "512x512 linear within Xavier bound",
        float(np.abs(w).max()) <= bound and abs(float(w.std()) - uniform_std) <= 0.1 * uniform_std,
        f"max |w| {np.abs(w).max():.5f} <= {bound:.5f}, std {w.std():.5f} vs {uniform_std:.5f}",
    ))

    model = MusicTransformer(ModelConfig(d_model=128, num_layers=4, max_len=256), seed)
    init_parameters(model, "xavier_split", seed)
    over = []
    sampled = 0
    for name, role, p in model.named_parameter_roles():
        if role == WEIGHT:
            b = xavier_bound(p.shape[0], int(np.prod(p.shape[1:])))
            sampled += p.size
            if float(np.abs(p.data).max()) > b:
                over.append(name)
        elif role == INPUT_EMBEDDING and abs(float(p.data.std()) - 128 ** -0.5) > 0.1 * 128 ** -0.5:
            over.append(name)
    results.append(CheckResult(
        "every transformer weight within its Xavier bound",
        not over and sampled >= 10_000,
        f"{sampled} weight entries checked" + (f"; violations: {over}" if over else ""),
    ))
    return results


def run_all(quick: bool = False, report: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    """Criteria 1-3, 6 and 7.  ``quick`` samples 16 entries per tensor in the model gradient checks."""
    results: list[CheckResult] = []

    def emit(items):
        for r in items if isinstance(items, list) else [items]:
            results.append(r)
            if report:
                report(r)

    started = time.perf_counter()
    emit(check_sliding_window_oracle())
    emit(check_relative_oracle())
    emit(check_gradients(max_entries=16 if quick else None))
    emit(check_early_stopping())
    emit(check_initialisation())
    if report:
        report(CheckResult("verify", all(r.passed for r in results), f"{time.perf_counter() - started:.1f}s"))
    return results
