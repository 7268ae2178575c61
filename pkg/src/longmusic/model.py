"""Decoder-only music transformer (three attention modes) and the LSTM baseline."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .attention import MODES, AttentionConfig, RelativeEmbeddings, attention
from .errors import CapacityError, ContractError, DimensionError, VocabularyError
from .init import init_parameters
from .layers import Embedding, LayerNorm, Linear, Module
from .tensor import Tensor, dropout, lstm_recurrence, parameter, relu, reshape, transpose


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 390
    d_model: int = 128
    num_layers: int = 4
    num_heads: int = 4
    ff_dim: int = 512
    max_len: int = 1024
    attention_mode: str = "relative"
    attention_window: int = 64
    dilation: int = 1
    dropout_p: float = 0.1

    kind = "transformer"

    def __post_init__(self):
        if min(self.vocab_size, self.d_model, self.num_layers, self.num_heads, self.ff_dim, self.max_len) < 1:
            raise ContractError("model dimensions must be positive")
        if self.d_model % self.num_heads:
            raise ContractError(f"d_model {self.d_model} not divisible by num_heads {self.num_heads}")
        if self.attention_mode not in MODES:
            raise ContractError(f"unknown attention mode {self.attention_mode!r}")
        self.attention  # validates the window settings

    @property
    def head_dim(self) -> int:
        return self.d_model // self.num_heads

    @property
    def attention(self) -> AttentionConfig:
        return AttentionConfig(
            num_heads=self.num_heads,
            head_dim=self.head_dim,
            mode=self.attention_mode,
            attention_window=self.attention_window,
            dilation=self.dilation,
            dropout_p=self.dropout_p,
            causal=True,
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}


@dataclass(frozen=True)
class LstmConfig:
    vocab_size: int = 390
    embed_dim: int = 128
    hidden_dim: int = 256
    num_layers: int = 2
    dropout_p: float = 0.1
    max_len: int = 1024

    kind = "lstm"

    def __post_init__(self):
        if min(self.vocab_size, self.embed_dim, self.hidden_dim, self.num_layers, self.max_len) < 1:
            raise ContractError("LSTM dimensions must be positive")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}


def config_from_dict(d: dict) -> ModelConfig | LstmConfig:
    d = dict(d)
    kind = d.pop("kind", "transformer")
    cls = LstmConfig if kind == "lstm" else ModelConfig
    names = {f.name for f in fields(cls)}
    return cls(**{k: v for k, v in d.items() if k in names})


def positional_encoding(length: int, d: int, dtype=None) -> np.ndarray:
    """Sinusoidal table: ``PE[pos, 2i] = sin(pos / 10000**(2i/d))``, odd columns cos."""
    if d % 2:
        raise DimensionError(f"positional encoding needs an even width, got {d}")
    pos = np.arange(length, dtype=np.float64)[:, None]
    rates = 10000.0 ** (np.arange(0, d, 2, dtype=np.float64) / d)
    pe = np.zeros((length, d))
    pe[:, 0::2] = np.sin(pos / rates)
    pe[:, 1::2] = np.cos(pos / rates)
    return pe.astype(dtype or np.float32)


def _check_tokens(tokens, vocab_size: int, max_len: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(tokens)
    if arr.dtype.kind not in "iu":
        raise VocabularyError(f"tokens must be integers, got dtype {arr.dtype}")
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionError(f"tokens must be [n] or [batch, n], got {arr.shape}")
    if arr.shape[1] > max_len:
        raise CapacityError(f"sequence length {arr.shape[1]} exceeds max_len {max_len}")
    if arr.size and (arr.min() < 0 or arr.max() >= vocab_size):
        bad = arr[(arr < 0) | (arr >= vocab_size)][0]
        raise VocabularyError(f"token {int(bad)} outside vocabulary of size {vocab_size}")
    return arr, squeeze


class MultiHeadAttention(Module):
    def __init__(self, cfg: ModelConfig):
        d = cfg.d_model
        self.cfg = cfg.attention
        self.query = Linear(d, d)
        self.key = Linear(d, d)
        self.value = Linear(d, d)
        self.out = Linear(d, d)
        if cfg.attention_mode == "relative":
            self.rel_table = parameter(np.zeros((cfg.max_len, cfg.head_dim)))

    def _split(self, x: Tensor, batch: int, n: int) -> Tensor:
        x = reshape(x, (batch, n, self.cfg.num_heads, self.cfg.head_dim))
        return transpose(x, (0, 2, 1, 3))

    def __call__(self, x: Tensor, rng=None) -> Tensor:
        batch, n, d = x.shape
        q = self._split(self.query(x), batch, n)
        k = self._split(self.key(x), batch, n)
        v = self._split(self.value(x), batch, n)
        rel = RelativeEmbeddings(self.rel_table) if self.cfg.mode == "relative" else None
        heads = attention(q, k, v, self.cfg, rel=rel, rng=rng, training=self.training)
        merged = reshape(transpose(heads, (0, 2, 1, 3)), (batch, n, d))
        return self.out(merged)


class FeedForward(Module):
    def __init__(self, d: int, ff: int):
        self.inner = Linear(d, ff)
        self.outer = Linear(ff, d)

    def __call__(self, x: Tensor) -> Tensor:
        return self.outer(relu(self.inner(x)))


class DecoderLayer(Module):
    """Post-norm block: x = LN(x + attn(x)); x = LN(x + ff(x))."""

    def __init__(self, cfg: ModelConfig):
        self.dropout_p = cfg.dropout_p
        self.attn = MultiHeadAttention(cfg)
        self.norm1 = LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg.d_model, cfg.ff_dim)
        self.norm2 = LayerNorm(cfg.d_model)

    def __call__(self, x: Tensor, rng=None) -> Tensor:
        a = dropout(self.attn(x, rng), self.dropout_p, rng, self.training)
        x = self.norm1(x + a)
        f = dropout(self.ff(x), self.dropout_p, rng, self.training)
        return self.norm2(x + f)


class MusicTransformer(Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.config = cfg
        self.embed = Embedding(cfg.vocab_size, cfg.d_model)
        self.layers = [DecoderLayer(cfg) for _ in range(cfg.num_layers)]
        self.final_norm = LayerNorm(cfg.d_model)
        self.head = Linear(cfg.d_model, cfg.vocab_size)
        self._pe = positional_encoding(cfg.max_len, cfg.d_model)
        init_parameters(self, "default", seed)

    def __call__(self, tokens, rng=None) -> Tensor:
        return self.forward(tokens, rng)

    def forward(self, tokens, rng=None) -> Tensor:
        """Next-token logits ``[n, vocab]`` (or ``[batch, n, vocab]`` for 2-D input)."""
        cfg = self.config
        arr, squeeze = _check_tokens(tokens, cfg.vocab_size, cfg.max_len)
        n = arr.shape[1]
        dtype = self.embed.weight.dtype
        x = self.embed(arr) * math.sqrt(cfg.d_model) + Tensor(self._pe[:n], dtype=dtype)
        x = dropout(x, cfg.dropout_p, rng, self.training)
        for layer in self.layers:
            x = layer(x, rng)
        logits = self.head(self.final_norm(x))
        return logits[0] if squeeze else logits


class LstmModel(Module):
    def __init__(self, cfg: LstmConfig, seed: int = 0):
        self.config = cfg
        self.embed = Embedding(cfg.vocab_size, cfg.embed_dim)
        self.input_proj = []
        self.recurrent = []
        for layer in range(cfg.num_layers):
            d_in = cfg.embed_dim if layer == 0 else cfg.hidden_dim
            self.input_proj.append(Linear(d_in, 4 * cfg.hidden_dim))
            self.recurrent.append(_Recurrent(cfg.hidden_dim))
        self.head = Linear(cfg.hidden_dim, cfg.vocab_size)
        init_parameters(self, "default", seed)

    def __call__(self, tokens, rng=None) -> Tensor:
        return self.forward(tokens, rng)

    def forward(self, tokens, rng=None, return_gates: bool = False):
        cfg = self.config
        arr, squeeze = _check_tokens(tokens, cfg.vocab_size, cfg.max_len)
        x = self.embed(arr)
        gates = []
        for proj, rec in zip(self.input_proj, self.recurrent):
            x = dropout(x, cfg.dropout_p, rng, self.training)
            result = lstm_recurrence(proj(x), rec.w_hh, return_gates=return_gates)
            if return_gates:
                x, acts, cells = result
                gates.append((acts, cells))
            else:
                x = result
        x = dropout(x, cfg.dropout_p, rng, self.training)
        logits = self.head(x)
        if squeeze:
            logits = logits[0]
        return (logits, gates) if return_gates else logits


class _Recurrent(Module):
    def __init__(self, hidden: int):
        self.w_hh = parameter(np.zeros((hidden, 4 * hidden)))


def build_model(cfg: ModelConfig | LstmConfig, seed: int = 0) -> MusicTransformer | LstmModel:
    if isinstance(cfg, LstmConfig):
        return LstmModel(cfg, seed)
    return MusicTransformer(cfg, seed)


def expected_parameter_count(cfg: ModelConfig | LstmConfig) -> int:
    """Closed-form parameter count, independent of the module tree."""
    V = cfg.vocab_size
    if isinstance(cfg, LstmConfig):
        E, H = cfg.embed_dim, cfg.hidden_dim
        total = V * E + H * V + V
        for layer in range(cfg.num_layers):
            d_in = E if layer == 0 else H
            total += d_in * 4 * H + 4 * H + H * 4 * H
        return total
    d, ff = cfg.d_model, cfg.ff_dim
    per_layer = 4 * (d * d + d) + (d * ff + ff) + (ff * d + d) + 2 * 2 * d
    if cfg.attention_mode == "relative":
        per_layer += cfg.max_len * cfg.head_dim
    return V * d + cfg.num_layers * per_layer + 2 * d + d * V + V
