"""Autoregressive sampling from a trained model."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import chunked_only
from .checkpoint import load_checkpoint
from .errors import CapacityError, ContractError
from .events import VOCAB
from .layers import Module
from .tensor import no_grad

STRATEGIES = ("categorical", "greedy")


@dataclass(frozen=True)
class SamplerConfig:
    temperature: float = 1.0
    primer: tuple[int, ...] | None = None
    target_length: int = 512
    seed: int = 0
    strategy: str = "categorical"

    def __post_init__(self):
        if self.temperature <= 0:
            raise ContractError("temperature must be > 0")
        if self.strategy not in STRATEGIES:
            raise ContractError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.primer is not None and self.target_length < len(self.primer):
            raise ContractError("target_length shorter than the primer")


def next_token_distribution(logits: np.ndarray, temperature: float, allowed: np.ndarray | None = None) -> np.ndarray:
    """softmax(logits / temperature) in float64, zero outside ``allowed``."""
    z = np.asarray(logits, dtype=np.float64) / temperature
    if allowed is not None:
        z = np.where(allowed, z, -np.inf)
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def default_allowed(vocab_size: int) -> np.ndarray:
    """Every event token; PAD and BOS are never generated."""
    allowed = np.ones(vocab_size, dtype=bool)
    if vocab_size == VOCAB.size:
        allowed[[VOCAB.pad, VOCAB.bos]] = False
    return allowed


def _resolve(model_or_path) -> Module:
    if isinstance(model_or_path, Module):
        return model_or_path
    if isinstance(model_or_path, (str, Path)):
        return load_checkpoint(model_or_path)[0]
    raise ContractError("sample needs a model or a checkpoint path")


def sample(model_or_path, cfg: SamplerConfig) -> np.ndarray:
    """Extend the primer (default ``[BOS]``) one token at a time up to ``target_length``.

    The whole prefix is re-run through the model at every step, so
    sliding-window models generate with the same chunked kernel they were
    trained with.
    """
    model = _resolve(model_or_path)
    max_len = model.config.max_len
    vocab_size = model.config.vocab_size
    primer = list(cfg.primer) if cfg.primer is not None else [VOCAB.bos]
    if len(primer) > max_len:
        raise CapacityError(f"primer of {len(primer)} tokens exceeds max_len {max_len}")
    if cfg.target_length > max_len + 1:
        raise CapacityError(f"target_length {cfg.target_length} exceeds max_len + 1 = {max_len + 1}")
    allowed = default_allowed(vocab_size)
    rng = np.random.default_rng(cfg.seed)
    tokens = np.asarray(primer, dtype=np.int64)
    was_training = model.training
    model.eval()
    try:
        with no_grad(), chunked_only():
            while len(tokens) < cfg.target_length:
                logits = model(tokens).data[-1]
                if cfg.strategy == "greedy":
                    nxt = int(np.argmax(np.where(allowed, logits, -np.inf)))
                else:
                    p = next_token_distribution(logits, cfg.temperature, allowed)
                    nxt = int(rng.choice(vocab_size, p=p))
                tokens = np.append(tokens, nxt)
    finally:
        model.train(was_training)
    return tokens
