"""Attention kernels: dense causal, relative (skewed), and chunked sliding-window.

All kernels take ``q, k, v`` of shape ``[..., heads, n, head_dim]`` and return
the same shape.  The sliding-window kernel never materialises an ``n x n``
score matrix: queries and keys are cut into overlapping chunks of size
``attention_window`` with 50% overlap, the chunks are multiplied pairwise, and
each query keeps the ``3 * w/2`` scores that cover its band.
"""

from __future__ import annotations

import math
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, ContractError, DimensionError, EmptyInputError, PreconditionError
from .tensor import (
    Tensor,
    concat,
    dropout,
    masked_softmax,
    matmul,
    pad,
    reshape,
)

MODES = ("dense_causal", "relative", "sliding_window")


class DenseFallbackWarning(UserWarning):
    """The sliding window covers the whole sequence, so the dense path was used."""


_fallback_enabled = True


@contextmanager
def chunked_only():
    """Disable the dense fallback so short sequences also take the chunked path."""
    global _fallback_enabled
    prev, _fallback_enabled = _fallback_enabled, False
    try:
        yield
    finally:
        _fallback_enabled = prev


@dataclass(frozen=True)
class AttentionConfig:
    num_heads: int
    head_dim: int
    mode: str = "dense_causal"
    attention_window: int = 64
    dilation: int = 1
    dropout_p: float = 0.0
    causal: bool = True

    def __post_init__(self):
        if self.num_heads < 1 or self.head_dim < 1:
            raise ContractError("num_heads and head_dim must be positive")
        if self.mode not in MODES:
            raise ContractError(f"unknown attention mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "sliding_window":
            if self.attention_window < 2 or self.attention_window % 2:
                raise ContractError(f"attention_window must be even and >= 2, got {self.attention_window}")
        if self.dilation < 1:
            raise ContractError("dilation must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ContractError("dropout_p must be in [0, 1)")

    @property
    def one_sided_window(self) -> int:
        return self.attention_window // 2


class RelativeEmbeddings:
    """Learned per-offset key embeddings shared by all heads of a layer.

    Row ``max_len - 1 - d`` of ``table`` holds the embedding for distance
    ``d = i - j >= 0`` so that the last ``n`` rows serve a length-``n`` input.
    """

    def __init__(self, table: Tensor):
        if table.ndim != 2:
            raise DimensionError(f"relative table must be 2-D, got {table.shape}")
        self.table = table

    @property
    def max_len(self) -> int:
        return self.table.shape[0]

    @property
    def head_dim(self) -> int:
        return self.table.shape[1]

    def for_length(self, n: int) -> Tensor:
        if n > self.max_len:
            raise CapacityError(f"sequence length {n} exceeds relative table capacity {self.max_len}")
        return self.table[self.max_len - n :]


def _check_qkv(q: Tensor, k: Tensor, v: Tensor) -> int:
    if q.shape != k.shape or q.shape != v.shape:
        raise DimensionError(f"q, k, v shapes differ: {q.shape}, {k.shape}, {v.shape}")
    if q.ndim < 2:
        raise DimensionError(f"attention inputs need shape [..., n, s], got {q.shape}")
    n = q.shape[-2]
    if n == 0:
        raise EmptyInputError("attention over an empty sequence")
    return n


def causal_mask(n: int) -> np.ndarray:
    return np.tril(np.ones((n, n), dtype=bool))


def band_mask_oracle(n: int, w: int, dilation: int = 1, causal: bool = True) -> np.ndarray:
    """Dense 0/1 matrix of the (i, j) pairs the sliding window connects."""
    if n < 1:
        raise EmptyInputError("band mask needs n >= 1")
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    diff = i - j
    mask = np.abs(diff) <= w // 2
    if dilation > 1:
        mask &= diff % dilation == 0
    if causal:
        mask &= j <= i
    return mask.astype(np.int8)


def _attend(scores: Tensor, mask, v: Tensor, cfg: AttentionConfig, rng, training: bool) -> Tensor:
    probs = masked_softmax(scores, mask)
    probs = dropout(probs, cfg.dropout_p, rng, training)
    return matmul(probs, v)


def masked_dense_attention(
    q: Tensor, k: Tensor, v: Tensor, mask, cfg: AttentionConfig | None = None,
    rng=None, training: bool = False,
) -> Tensor:
    """softmax(q kᵀ/√s restricted to ``mask``) v, the dense reference path."""
    _check_qkv(q, k, v)
    s = q.shape[-1]
    scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / math.sqrt(s))
    cfg = cfg or AttentionConfig(num_heads=1, head_dim=s)
    return _attend(scores, mask, v, cfg, rng, training)


def dense_causal_attention(
    q: Tensor, k: Tensor, v: Tensor, cfg: AttentionConfig, rng=None, training: bool = False
) -> Tensor:
    n = _check_qkv(q, k, v)
    mask = causal_mask(n) if cfg.causal else None
    return masked_dense_attention(q, k, v, mask, cfg, rng, training)


def skew(rel_logits: Tensor) -> Tensor:
    """Turn per-offset logits ``[..., n, n_offsets]`` into per-pair logits ``[..., n, n]``.

    Column ``m`` of the input is relative distance ``n - 1 - m``; the output
    satisfies ``out[i, j] = rel_logits[i, n - 1 - (i - j)]`` for ``j <= i``.
    Entries above the diagonal are junk and must be masked by the caller.
    """
    if rel_logits.ndim < 2:
        raise DimensionError(f"skew needs [..., n, n], got {rel_logits.shape}")
    n, m = rel_logits.shape[-2:]
    if n != m:
        raise DimensionError(f"skew needs as many offsets as positions, got {rel_logits.shape}")
    lead = rel_logits.shape[:-2]
    widths = [(0, 0)] * len(lead) + [(0, 0), (1, 0)]
    padded = pad(rel_logits, widths)
    folded = reshape(padded, lead + (n + 1, n))
    return folded[(Ellipsis, slice(1, None), slice(None))]


def relative_attention(
    q: Tensor, k: Tensor, v: Tensor, rel: RelativeEmbeddings, cfg: AttentionConfig,
    rng=None, training: bool = False,
) -> Tensor:
    n = _check_qkv(q, k, v)
    s = q.shape[-1]
    if rel.head_dim != s:
        raise DimensionError(f"relative table width {rel.head_dim} != head dim {s}")
    e_rel = rel.for_length(n)
    rel_logits = matmul(q, e_rel.swapaxes(-1, -2))
    scores = (matmul(q, k.swapaxes(-1, -2)) + skew(rel_logits)) * (1.0 / math.sqrt(s))
    mask = causal_mask(n) if cfg.causal else None
    return _attend(scores, mask, v, cfg, rng, training)


def chunk_overlapping(x: Tensor, w: int) -> Tensor:
    """Split ``[..., n, s]`` into ``n/(w/2) - 1`` chunks of ``w`` rows overlapping by ``w/2``."""
    if w < 2 or w % 2:
        raise PreconditionError(f"chunk size must be even and >= 2, got {w}")
    half = w // 2
    n, s = x.shape[-2:]
    if n % half or n < w:
        raise PreconditionError(f"length {n} must be a multiple of {half} and at least {w}")
    lead = x.shape[:-2]
    blocks = reshape(x, lead + (n // half, half, s))
    first = blocks[(Ellipsis, slice(None, -1), slice(None), slice(None))]
    second = blocks[(Ellipsis, slice(1, None), slice(None), slice(None))]
    return concat([first, second], axis=-2)


@lru_cache(maxsize=128)
def _window_mask(n: int, half: int, dilation: int, causal: bool) -> np.ndarray:
    """Mask ``[blocks, half, 3*half]`` for the chunked layout.

    Query row ``r`` of block ``b`` is position ``b*half + r``; score column
    ``t`` is key position ``(b-1)*half + t``.
    """
    blocks = -(-n // half)
    b = np.arange(blocks)[:, None, None]
    r = np.arange(half)[None, :, None]
    t = np.arange(3 * half)[None, None, :]
    i = b * half + r
    j = (b - 1) * half + t
    diff = i - j
    mask = (j >= 0) & (j < n) & (np.abs(diff) <= half)
    if dilation > 1:
        mask &= diff % dilation == 0
    if causal:
        mask &= diff >= 0
    mask.setflags(write=False)
    return mask


def sliding_window_attention(
    q: Tensor, k: Tensor, v: Tensor, cfg: AttentionConfig, rng=None, training: bool = False
) -> Tensor:
    """Chunked local attention over a band of ``attention_window // 2`` on each side."""
    n = _check_qkv(q, k, v)
    w = cfg.attention_window
    half = cfg.one_sided_window
    if w >= 2 * n and _fallback_enabled:
        warnings.warn(
            f"attention_window {w} >= 2 * length {n}; using dense attention with the band mask",
            DenseFallbackWarning,
            stacklevel=2,
        )
        mask = band_mask_oracle(n, w, cfg.dilation, cfg.causal).astype(bool)
        return masked_dense_attention(q, k, v, mask, cfg, rng, training)

    s = q.shape[-1]
    lead_nd = q.ndim - 2
    n_pad = -(-n // half) * half
    blocks = n_pad // half
    # right-pad to a multiple of half, plus one block on each side so every
    # query block has a previous and a next key block
    widths = [(0, 0)] * lead_nd + [(half, half + n_pad - n), (0, 0)]
    q = q * (1.0 / math.sqrt(s))
    qc = chunk_overlapping(pad(q, widths), w)
    kc = chunk_overlapping(pad(k, widths), w)
    vc = chunk_overlapping(pad(v, widths), w)

    scores = matmul(qc, kc.swapaxes(-1, -2))  # [..., blocks + 1, w, w]
    prev = scores[(Ellipsis, slice(0, blocks), slice(half, None), slice(0, half))]
    cur = scores[(Ellipsis, slice(1, blocks + 1), slice(0, half), slice(None))]
    local = concat([prev, cur], axis=-1)  # [..., blocks, half, 3*half]

    mask = _window_mask(n, half, cfg.dilation, cfg.causal)
    probs = masked_softmax(local, mask)
    probs = dropout(probs, cfg.dropout_p, rng, training)

    v_prev = vc[(Ellipsis, slice(0, blocks), slice(0, half), slice(None))]
    v_cur = vc[(Ellipsis, slice(1, blocks + 1), slice(None), slice(None))]
    out = matmul(probs[..., :half], v_prev) + matmul(probs[..., half:], v_cur)
    out = reshape(out, q.shape[:-2] + (n_pad, s))
    if n_pad != n:
        out = out[(Ellipsis, slice(0, n), slice(None))]
    return out


def attention(
    q: Tensor, k: Tensor, v: Tensor, cfg: AttentionConfig,
    rel: RelativeEmbeddings | None = None, rng=None, training: bool = False,
) -> Tensor:
    """Dispatch on ``cfg.mode``."""
    if cfg.mode == "sliding_window":
        return sliding_window_attention(q, k, v, cfg, rng, training)
    if cfg.mode == "relative":
        if rel is None:
            raise ContractError("relative mode needs RelativeEmbeddings")
        return relative_attention(q, k, v, rel, cfg, rng, training)
    return dense_causal_attention(q, k, v, cfg, rng, training)


# ---------------------------------------------------------------------------
# analytic multiply-accumulate counts (per head), mirroring the kernels above
# ---------------------------------------------------------------------------

def dense_macs(n: int, s: int, heads: int = 1) -> int:
    return heads * 2 * n * n * s


def relative_macs(n: int, s: int, heads: int = 1) -> int:
    return heads * 3 * n * n * s


def sliding_window_macs(n: int, w: int, s: int, heads: int = 1) -> int:
    half = w // 2
    if w >= 2 * n:
        return dense_macs(n, s, heads)
    blocks = -(-n // half)
    score = (blocks + 1) * w * w * s
    value = blocks * half * (3 * half) * s
    return heads * (score + value)
