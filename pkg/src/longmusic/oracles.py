"""Slow, loop-based reference computations used by tests and ``verify``.

These deliberately avoid the vectorised kernels they check: every score is
built one (i, j) pair at a time with plain numpy dot products.
"""

from __future__ import annotations

import math

import numpy as np


def matmul_loop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += float(a[i, t]) * float(b[t, j])
            out[i, j] = acc
    return out


def _softmax_row(scores: list[float]) -> list[float]:
    if not scores:
        return []
    top = max(scores)
    e = [math.exp(x - top) for x in scores]
    total = sum(e)
    return [x / total for x in e]


def masked_attention_loop(q: np.ndarray, k: np.ndarray, v: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-position attention for ``[heads, n, s]`` inputs and an ``[n, n]`` 0/1 mask."""
    q, k, v = (np.asarray(x, dtype=np.float64) for x in (q, k, v))
    h, n, s = q.shape
    out = np.zeros_like(q)
    scale = 1.0 / math.sqrt(s)
    for head in range(h):
        for i in range(n):
            cols = [j for j in range(n) if mask[i, j]]
            probs = _softmax_row([float(q[head, i] @ k[head, j]) * scale for j in cols])
            for p, j in zip(probs, cols):
                out[head, i] += p * v[head, j]
    return out


def causal_attention_loop(q, k, v) -> np.ndarray:
    n = q.shape[-2]
    return masked_attention_loop(q, k, v, np.tril(np.ones((n, n), dtype=bool)))


def relative_logits_loop(q: np.ndarray, table: np.ndarray) -> np.ndarray:
    """``out[h, i, j] = q[h, i] · E_rel[i - j]`` for ``j <= i`` (0 above the diagonal)."""
    q = np.asarray(q, dtype=np.float64)
    h, n, _ = q.shape
    max_len = table.shape[0]
    out = np.zeros((h, n, n))
    for head in range(h):
        for i in range(n):
            for j in range(i + 1):
                out[head, i, j] = float(q[head, i] @ table[max_len - 1 - (i - j)])
    return out


def relative_attention_loop(q, k, v, table) -> np.ndarray:
    q, k, v = (np.asarray(x, dtype=np.float64) for x in (q, k, v))
    h, n, s = q.shape
    max_len = table.shape[0]
    scale = 1.0 / math.sqrt(s)
    out = np.zeros_like(q)
    for head in range(h):
        for i in range(n):
            scores = []
            for j in range(i + 1):
                rel = float(q[head, i] @ table[max_len - 1 - (i - j)])
                scores.append((float(q[head, i] @ k[head, j]) + rel) * scale)
            for j, p in enumerate(_softmax_row(scores)):
                out[head, i] += p * v[head, j]
    return out
