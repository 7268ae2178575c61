"""Training harness: Adam, early stopping, NLL evaluation and the train loop."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .errors import ContractError, NonFiniteGradientError
from .events import VOCAB
from .init import init_parameters
from .layers import Module
from .model import LstmConfig, ModelConfig, build_model
from .tensor import Tensor, cross_entropy, no_grad

log = logging.getLogger(__name__)

__all__ = [
    "AdamState",
    "EarlyStopState",
    "TrainConfig",
    "TrainReport",
    "adam_step",
    "clip_grad_norm",
    "early_stop_update",
    "evaluate_nll",
    "init_parameters",
    "nll_stats",
    "train",
]


@dataclass
class TrainConfig:
    model: ModelConfig | LstmConfig
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.98
    eps_adam: float = 1e-9
    batch_size: int = 8
    max_steps: int = 1000
    use_xavier_init: bool = False
    use_early_stopping: bool = False
    early_stop_patience: int = 200
    eval_interval: int = 50
    max_eval_windows: int | None = None
    clip_norm: float | None = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.early_stop_patience < 1:
            raise ContractError("early_stop_patience must be >= 1")
        if self.lr <= 0:
            raise ContractError("learning rate must be positive")
        if self.batch_size < 1 or self.max_steps < 0 or self.eval_interval < 1:
            raise ContractError("batch_size and eval_interval must be positive, max_steps non-negative")

    @property
    def variant(self) -> str:
        parts = [name for name, on in (("xavier", self.use_xavier_init), ("early_stop", self.use_early_stopping)) if on]
        return "+".join(parts) or "none"


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
    if total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.98,
    eps: float = 1e-9,
) -> AdamState:
    """One bias-corrected Adam update, in place on ``params``.

    Every gradient is checked before anything is touched, so a non-finite
    gradient aborts the whole step and names the offending parameter.
    """
    for name, g in grads.items():
        if name not in params or g.shape != params[name].shape:
            raise ContractError(f"gradient {name!r} does not match a parameter")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)
    t = state.step + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, g in grads.items():
        p = params[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype)
    state.step = t
    return state


# ---------------------------------------------------------------------------
# early stopping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EarlyStopState:
    best_val: float = math.inf
    batches_since_improvement: int = 0
    stopped: bool = False
    improved: bool = False
    non_finite: int = 0


def early_stop_update(state: EarlyStopState, val_loss: float, patience: int) -> EarlyStopState:
    """Advance the patience counter by one validation result.

    Only a strict improvement resets the counter.  A NaN/inf loss counts as a
    non-improvement and is tallied in ``non_finite``.
    """
    if patience < 1:
        raise ContractError("patience must be >= 1")
    finite = math.isfinite(val_loss)
    if finite and val_loss < state.best_val:
        return EarlyStopState(val_loss, 0, False, True, state.non_finite)
    count = state.batches_since_improvement + 1
    return EarlyStopState(
        state.best_val,
        count,
        count >= patience,
        False,
        state.non_finite + (0 if finite else 1),
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class NllStats:
    nll: float
    tokens: int
    skipped_batches: int


def _batches(windows: list[np.ndarray], batch_size: int):
    for i in range(0, len(windows), batch_size):
        yield np.stack(windows[i : i + batch_size])


def nll_stats(model: Module, windows, batch_size: int = 8, pad_id: int = VOCAB.pad) -> NllStats:
    windows = list(windows)
    if not windows:
        raise ContractError("evaluate_nll needs a non-empty dataset")
    was_training = model.training
    model.eval()
    total, count, skipped = 0.0, 0, 0
    try:
        with no_grad():
            for batch in _batches(windows, batch_size):
                targets = batch[:, 1:]
                n_valid = int((targets != pad_id).sum())
                if n_valid == 0:
                    skipped += 1
                    continue
                logits = model(batch[:, :-1])
                loss = cross_entropy(logits, targets, ignore_index=pad_id)
                total += float(loss.data) * n_valid
                count += n_valid
    finally:
        model.train(was_training)
    return NllStats(total / count if count else math.nan, count, skipped)


def evaluate_nll(model: Module, windows, batch_size: int = 8, pad_id: int = VOCAB.pad) -> float:
    """Mean per-token NLL (nats) over non-PAD next-token targets."""
    return nll_stats(model, windows, batch_size, pad_id).nll


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainReport:
    train_nll: list[float] = field(default_factory=list)
    val_nll: list[tuple[int, float]] = field(default_factory=list)
    ms_per_step: list[float] = field(default_factory=list)
    steps: int = 0
    stop_reason: str = "max_steps"
    best_val: float = math.inf
    checkpoint_path: Path | None = None
    skipped_steps: list[tuple[int, str]] = field(default_factory=list)


def _write_record(fh, record: dict) -> None:
    if fh is not None:
        fh.write(json.dumps(record) + "\n")
        fh.flush()


def build_and_init(config: TrainConfig) -> Module:
    model = build_model(config.model, seed=config.seed)
    init_parameters(model, "xavier_split" if config.use_xavier_init else "default", config.seed)
    return model


def train(
    config: TrainConfig,
    train_windows: list[np.ndarray],
    val_windows: list[np.ndarray] | None = None,
    checkpoint_path=None,
    log_path=None,
    model: Module | None = None,
    pad_id: int = VOCAB.pad,
    stop_below: float | None = None,
    time_budget_s: float | None = None,
) -> tuple[Module, TrainReport]:
    """Train one model/variant cell and return the (best) model with its report.

    Deterministic given ``config.seed`` and the window order.  Validation runs
    every ``eval_interval`` steps; with early stopping on, patience counts
    validation rounds and the best parameters are restored on exit.
    ``stop_below`` ends training once the batch NLL drops under the value
    (used by smoke tests); ``time_budget_s`` caps wall-clock time.
    """
    if not train_windows:
        raise ContractError("empty training set")
    model = model or build_and_init(config)
    model.train()
    params = dict(model.named_parameters())
    rng = np.random.default_rng(config.seed)
    adam = AdamState()
    es = EarlyStopState()
    report = TrainReport(checkpoint_path=Path(checkpoint_path) if checkpoint_path else None)
    best_state = None
    eval_set = val_windows[: config.max_eval_windows] if val_windows else None
    initial_loss = None
    diverging = 0

    order = rng.permutation(len(train_windows))
    cursor = 0
    started = time.perf_counter()
    fh = open(log_path, "w") if log_path else None
    try:
        for step in range(1, config.max_steps + 1):
            t0 = time.perf_counter()
            if cursor + config.batch_size > len(order):
                order = rng.permutation(len(train_windows))
                cursor = 0
            idx = order[cursor : cursor + config.batch_size]
            cursor += config.batch_size
            batch = np.stack([train_windows[i] for i in idx])
            inputs, targets = batch[:, :-1], batch[:, 1:]
            if not (targets != pad_id).any():
                continue

            model.zero_grad()
            drop_rng = np.random.default_rng([config.seed, step])
            loss = cross_entropy(model(inputs, drop_rng), targets, ignore_index=pad_id)
            loss.backward()
            grads = {name: (p.grad if p.grad is not None else np.zeros_like(p.data)) for name, p in params.items()}
            if config.clip_norm:
                clip_grad_norm(grads, config.clip_norm)
            try:
                adam_step(params, grads, adam, config.lr, config.beta1, config.beta2, config.eps_adam)
            except NonFiniteGradientError as exc:
                log.warning("step %d skipped: %s", step, exc)
                report.skipped_steps.append((step, exc.name))
                continue

            value = float(loss.data)
            elapsed = (time.perf_counter() - t0) * 1000
            report.train_nll.append(value)
            report.ms_per_step.append(elapsed)
            report.steps = step
            record = {"step": step, "train_nll": value, "val_nll": None, "ms_per_step": elapsed}

            if initial_loss is None:
                initial_loss = value
            diverging = diverging + 1 if value > 10 * initial_loss else 0
            if diverging >= 100:
                report.stop_reason = "diverged"
                _write_record(fh, record)
                break

            if eval_set and (step % config.eval_interval == 0 or step == config.max_steps):
                val = evaluate_nll(model, eval_set, config.batch_size, pad_id)
                report.val_nll.append((step, val))
                record["val_nll"] = val
                es = early_stop_update(es, val, config.early_stop_patience)
                if es.improved:
                    report.best_val = val
                    best_state = model.state_dict()
                    if checkpoint_path:
                        save_checkpoint(checkpoint_path, model, step, val, {"variant": config.variant})
                if config.use_early_stopping and es.stopped:
                    report.stop_reason = "early_stopping"
                    _write_record(fh, record)
                    break
            _write_record(fh, record)
            if stop_below is not None and value < stop_below:
                report.stop_reason = "target_reached"
                break
            if time_budget_s is not None and time.perf_counter() - started > time_budget_s:
                report.stop_reason = "time_budget"
                break
    finally:
        if fh is not None:
            fh.close()

    if config.use_early_stopping and best_state is not None:
        model.load_state_dict(best_state)
    elif checkpoint_path:
        save_checkpoint(checkpoint_path, model, report.steps, report.best_val, {"variant": config.variant})
    model.eval()
    return model, report


def grid_configs(base_model_configs: dict[str, ModelConfig | LstmConfig], **train_kwargs) -> dict[str, TrainConfig]:
    """The 3-family x 4-variant experiment grid: every model with each optimisation toggle pair."""
    grid = {}
    for family, mcfg in base_model_configs.items():
        for xavier in (False, True):
            for early in (False, True):
                cfg = TrainConfig(mcfg, use_xavier_init=xavier, use_early_stopping=early, **train_kwargs)
                grid[f"{family}/{cfg.variant}"] = cfg
    return grid
