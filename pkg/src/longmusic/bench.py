"""Attention benchmark: wall-clock and multiply-accumulate scaling per mode.

Times are kernel-level (one attention call on ``[heads, n, head_dim]``),
not full training time.
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .attention import (
    AttentionConfig,
    RelativeEmbeddings,
    attention,
    dense_macs,
    relative_macs,
    sliding_window_macs,
)
from .errors import PreconditionError
from .tensor import Tensor, count_macs, mul, no_grad

WINDOWED_SLOPE_MAX = 1.4
DENSE_SLOPE_MIN = 1.7


@dataclass
class BenchRow:
    mode: str
    n: int
    window: int
    heads: int
    head_dim: int
    forward_ms: float
    forward_backward_ms: float
    macs: int
    macs_analytic: int
    repetitions: int
    trials: int


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    time_slopes: dict[str, float] = field(default_factory=dict)
    backward_slopes: dict[str, float] = field(default_factory=dict)
    mac_slopes: dict[str, float] = field(default_factory=dict)
    speedup: dict[int, dict[str, float]] = field(default_factory=dict)
    anomalies: list[str] = field(default_factory=list)

    def row(self, mode: str, n: int) -> BenchRow:
        for r in self.rows:
            if r.mode == mode and r.n == n:
                return r
        raise KeyError((mode, n))

    def records(self) -> list[dict]:
        out = [{"record": "timing", **asdict(r)} for r in self.rows]
        for mode in self.time_slopes:
            out.append({
                "record": "slope",
                "mode": mode,
                "forward_time": self.time_slopes[mode],
                "forward_backward_time": self.backward_slopes.get(mode),
                "macs": self.mac_slopes.get(mode),
            })
        for n, s in self.speedup.items():
            out.append({"record": "speedup", "n": n, **s})
        for a in self.anomalies:
            out.append({"record": "anomaly", "message": a})
        return out

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r) for r in self.records())

    def table(self) -> str:
        lines = [f"{'mode':<15}{'n':>7}{'w':>6}{'fwd ms':>11}{'fwd+bwd ms':>13}{'MACs':>15}"]
        for r in self.rows:
            lines.append(
                f"{r.mode:<15}{r.n:>7}{r.window:>6}{r.forward_ms:>11.3f}{r.forward_backward_ms:>13.3f}{r.macs:>15,}"
            )
        lines.append("")
        for mode, s in self.time_slopes.items():
            lines.append(
                f"log-log slope {mode:<15} time {s:5.2f}   fwd+bwd {self.backward_slopes[mode]:5.2f}"
                f"   MACs {self.mac_slopes[mode]:5.2f}"
            )
        for n, s in self.speedup.items():
            lines.append(
                f"n={n:<6} windowed vs dense (kernel-level): forward {s['forward_reduction']:+.1%}, "
                f"forward+backward {s['forward_backward_reduction']:+.1%} time saved"
            )
        for a in self.anomalies:
            lines.append(f"ANOMALY: {a}")
        return "\n".join(lines)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def analytic_macs(mode: str, n: int, w: int, s: int, heads: int) -> int:
    if mode == "sliding_window":
        return sliding_window_macs(n, w, s, heads)
    if mode == "relative":
        return relative_macs(n, s, heads)
    return dense_macs(n, s, heads)


def _time(fn, trials: int, min_ms: float) -> tuple[float, int]:
    """Median milliseconds per call; repetitions grow until a trial lasts ``min_ms``."""
    fn()  # warmup, discarded
    reps = 1
    while True:
        samples = []
        for _ in range(trials):
            t0 = time.perf_counter()
            for _ in range(reps):
                fn()
            samples.append((time.perf_counter() - t0) * 1000 / reps)
        median = statistics.median(samples)
        if median * reps >= min_ms or reps >= 1 << 12:
            return median, reps
        reps *= 2


def bench_attention(
    lengths,
    window: int = 64,
    modes=("dense_causal", "sliding_window"),
    heads: int = 1,
    head_dim: int = 64,
    trials: int = 5,
    seed: int = 0,
    min_ms: float = 1.0,
    backward: bool = True,
    threads: int = 1,
) -> BenchReport:
    lengths = sorted(int(n) for n in lengths)
    half = window // 2
    for n in lengths:
        if n % half:
            raise PreconditionError(f"length {n} is not a multiple of window/2 = {half}")
    trials = max(trials, 5)
    report = BenchReport()
    rng = np.random.default_rng(seed)
    inputs = {n: [rng.standard_normal((heads, n, head_dim)).astype(np.float32) for _ in range(4)] for n in lengths}
    table = rng.standard_normal((max(lengths), head_dim)).astype(np.float32) * 0.1

    with threadpool_limits(limits=threads):
        for mode in modes:
            cfg = AttentionConfig(heads, head_dim, mode, attention_window=window)
            for n in lengths:
                q, k, v, g = inputs[n]
                rel = RelativeEmbeddings(Tensor(table)) if mode == "relative" else None

                def forward():
                    with no_grad():
                        return attention(Tensor(q), Tensor(k), Tensor(v), cfg, rel=rel)

                def forward_backward():
                    qt, kt, vt = (Tensor(x, requires_grad=True) for x in (q, k, v))
                    out = attention(qt, kt, vt, cfg, rel=rel)
                    mul(out, Tensor(g)).sum().backward()

                with count_macs() as counter:
                    forward()
                fwd_ms, reps = _time(forward, trials, min_ms)
                bwd_ms = _time(forward_backward, trials, min_ms)[0] if backward else float("nan")
                report.rows.append(BenchRow(
                    mode, n, window, heads, head_dim, fwd_ms, bwd_ms,
                    counter.total, analytic_macs(mode, n, window, head_dim, heads), reps, trials,
                ))

    for mode in modes:
        rows = [report.row(mode, n) for n in lengths]
        if len(rows) >= 2:
            report.time_slopes[mode] = loglog_slope(lengths, [r.forward_ms for r in rows])
            report.backward_slopes[mode] = loglog_slope(lengths, [r.forward_backward_ms for r in rows]) if backward else float("nan")
            report.mac_slopes[mode] = loglog_slope(lengths, [r.macs for r in rows])
    if "dense_causal" in modes and "sliding_window" in modes:
        for n in lengths:
            d, s = report.row("dense_causal", n), report.row("sliding_window", n)
            report.speedup[n] = {
                "forward_reduction": 1 - s.forward_ms / d.forward_ms,
                "forward_backward_reduction": 1 - s.forward_backward_ms / d.forward_backward_ms,
            }
    if len(lengths) >= 4:
        ws = report.time_slopes.get("sliding_window")
        ds = report.time_slopes.get("dense_causal")
        if ws is not None and ws >= WINDOWED_SLOPE_MAX:
            report.anomalies.append(f"windowed time slope {ws:.2f} >= {WINDOWED_SLOPE_MAX}")
        if ds is not None and ds <= DENSE_SLOPE_MIN:
            report.anomalies.append(f"dense time slope {ds:.2f} <= {DENSE_SLOPE_MIN}")
    return report
