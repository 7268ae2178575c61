"""Dense float tensors with reverse-mode automatic differentiation.

Every :class:`Tensor` wraps a contiguous numpy array.  Operations on tensors
that require gradients record a small graph node holding the parent tensors
and a closure that maps the output gradient to parent gradients.  Calling
:meth:`Tensor.backward` on a scalar walks that graph once in reverse
topological order and accumulates ``.grad`` on the leaves.

Precision defaults to float32; :func:`precision` switches to float64 for the
finite-difference gradient checks.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ContractError, DimensionError

_default_dtype = np.dtype(np.float32)
_grad_enabled = True
_mac_counters: list["MacCounter"] = []


def get_default_dtype() -> np.dtype:
    return _default_dtype


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}")
    _default_dtype = dtype


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Temporarily change the default float dtype (``"float64"`` for grad checks)."""
    prev = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


@dataclass
class MacCounter:
    """Multiply-accumulate count of every matmul executed while active."""

    total: int = 0
    by_shape: list[tuple[tuple[int, ...], tuple[int, ...], int]] = field(default_factory=list)


@contextlib.contextmanager
def count_macs() -> Iterator[MacCounter]:
    counter = MacCounter()
    _mac_counters.append(counter)
    try:
        yield counter
    finally:
        _mac_counters.remove(counter)


class _Node:
    __slots__ = ("parents", "backward")

    def __init__(self, parents: tuple["Tensor", ...], backward: Callable):
        self.parents = parents
        self.backward = backward


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _as_tensor(x) -> "Tensor":
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _result(data: np.ndarray, parents: tuple["Tensor", ...], backward: Callable) -> "Tensor":
    out = Tensor.__new__(Tensor)
    out.data = data
    out.name = None
    out.grad = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.grad_node = _Node(parents, backward)
    else:
        out.requires_grad = False
        out.grad_node = None
    return out


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "grad_node", "name")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        self.data = np.ascontiguousarray(data, dtype=dtype or _default_dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.grad_node: _Node | None = None
        self.name = name

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # -- autodiff --------------------------------------------------------
    def backward(self) -> dict["Tensor", np.ndarray]:
        """Backpropagate from this scalar; returns ``{leaf: grad}`` for all reached leaves."""
        if self.data.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ContractError("loss does not depend on any tensor with requires_grad=True")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            if node.grad_node is not None:
                for p in node.grad_node.parents:
                    if p.requires_grad and id(p) not in seen:
                        stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        leaves: dict[Tensor, np.ndarray] = {}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.grad_node is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                leaves[node] = node.grad
                continue
            parent_grads = node.grad_node.backward(g)
            for p, pg in zip(node.grad_node.parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        return leaves

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    # -- shape / reductions as methods ----------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def swapaxes(self, a: int, b: int):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return transpose(self, tuple(axes))

    @property
    def T(self):
        return self.swapaxes(-1, -2)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    sa, sb = a.shape, b.shape
    return _result(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    sa, sb = a.shape, b.shape
    return _result(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _result(ad * bd, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g / bd, ad.shape), _unbroadcast(-g * ad / (bd * bd), bd.shape)

    return _result(ad / bd, (a, b), backward)


def power(a: Tensor, exponent: float) -> Tensor:
    ad = a.data
    return _result(ad ** exponent, (a,), lambda g: (g * exponent * ad ** (exponent - 1),))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _result(np.log(ad), (a,), lambda g: (g / ad,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1 - out * out),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)
    return _result(out, (a,), lambda g: (g * out * (1 - out),))


def relu(a: Tensor) -> Tensor:
    pos = a.data > 0
    return _result(a.data * pos, (a,), lambda g: (g * pos,))


def masked_fill(a: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where ``mask`` is true by a constant (no gradient flows there)."""
    mask = np.asarray(mask, dtype=bool)
    keep = ~mask
    out = np.where(mask, np.asarray(value, dtype=a.dtype), a.data)
    return _result(out, (a,), lambda g: (_unbroadcast(g * keep, a.shape),))


# ---------------------------------------------------------------------------
# linear algebra and reductions
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        batch = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul batch dimensions not broadcastable: {a.shape} @ {b.shape}") from None
    ad, bd = a.data, b.data
    out = np.matmul(ad, bd)
    if _mac_counters:
        macs = int(np.prod(batch, dtype=np.int64)) * a.shape[-2] * a.shape[-1] * b.shape[-1]
        for c in _mac_counters:
            c.total += macs
            c.by_shape.append((a.shape, b.shape, macs))

    def backward(g):
        ga = np.matmul(g, np.swapaxes(bd, -1, -2))
        gb = np.matmul(np.swapaxes(ad, -1, -2), g)
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _result(out, (a, b), backward)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _result(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return tsum(a, axis, keepdims) * (1.0 / count)


# ---------------------------------------------------------------------------
# views (implemented as copies; the contract is value-level)
# ---------------------------------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    orig = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(ax % a.ndim for ax in axes)
    inverse = tuple(np.argsort(axes))
    out = np.ascontiguousarray(np.transpose(a.data, axes))
    return _result(out, (a,), lambda g: (np.transpose(g, inverse),))


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, slice, type(None), type(Ellipsis))) for i in items)


def getitem(a: Tensor, idx) -> Tensor:
    shape, dtype = a.shape, a.dtype
    out = np.array(a.data[idx], copy=True)
    basic = _is_basic_index(idx)

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _result(out, (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return _result(out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)))


def pad(a: Tensor, pad_width, value: float = 0.0) -> Tensor:
    """Constant padding; ``pad_width`` follows :func:`numpy.pad`."""
    pad_width = [tuple(p) for p in pad_width]
    out = np.pad(a.data, pad_width, mode="constant", constant_values=value)
    region = tuple(slice(lo, lo + n) for (lo, _), n in zip(pad_width, a.shape))
    return _result(out, (a,), lambda g: (g[region],))


# ---------------------------------------------------------------------------
# neural-network primitives
# ---------------------------------------------------------------------------

def masked_softmax(x: Tensor, mask=None, axis: int = -1, return_status: bool = False):
    """Softmax over ``axis`` restricted to entries where ``mask`` is nonzero.

    Masked entries get exactly 0.  A row with no unmasked entry yields all
    zeros instead of NaN; with ``return_status=True`` a boolean array marking
    such rows is returned alongside the tensor.
    """
    xd = x.data
    if mask is None:
        keep = np.ones(xd.shape, dtype=bool)
    else:
        mask = np.asarray(mask)
        try:
            keep = np.broadcast_to(mask != 0, xd.shape)
        except ValueError:
            raise DimensionError(f"mask shape {mask.shape} not broadcastable to {xd.shape}") from None
    neg_inf = np.asarray(-np.inf, dtype=xd.dtype)
    masked = np.where(keep, xd, neg_inf)
    row_max = masked.max(axis=axis, keepdims=True)
    empty = ~np.isfinite(row_max)
    row_max = np.where(empty, 0, row_max)
    e = np.exp(masked - row_max)
    total = e.sum(axis=axis, keepdims=True)
    out = e / np.where(total > 0, total, 1)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    result = _result(out, (x,), backward)
    if return_status:
        return result, np.squeeze(empty, axis=axis)
    return result


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return masked_softmax(x, None, axis)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = x.data
    shifted = xd - xd.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)
    return _result(out, (x,), lambda g: (g - probs * g.sum(axis=axis, keepdims=True),))


def cross_entropy(logits: Tensor, targets, ignore_index: int | None = None) -> Tensor:
    """Mean negative log-likelihood (natural log) of ``targets`` under ``logits``.

    Targets equal to ``ignore_index`` are excluded from both numerator and
    denominator.  With no counted target the loss is 0.
    """
    targets = np.asarray(targets)
    ld = logits.data
    if ld.shape[:-1] != targets.shape:
        raise DimensionError(f"logits {ld.shape} do not match targets {targets.shape}")
    flat = ld.reshape(-1, ld.shape[-1])
    t = targets.reshape(-1)
    valid = np.ones(t.shape, dtype=bool) if ignore_index is None else t != ignore_index
    count = int(valid.sum())
    safe_t = np.where(valid, t, 0)
    shifted = flat - flat.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    picked = logp[np.arange(len(t)), safe_t]
    loss = -(picked * valid).sum() / max(count, 1)

    def backward(g):
        grad = np.exp(logp)
        grad[np.arange(len(t)), safe_t] -= 1
        grad *= (valid / max(count, 1))[:, None]
        return ((g * grad).reshape(ld.shape),)

    return _result(np.asarray(loss, dtype=ld.dtype), (logits,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    if eps <= 0:
        raise ContractError("layer_norm eps must be positive")
    d = x.shape[-1] if x.ndim else 0
    if d == 0:
        raise DimensionError("layer_norm over an empty feature dimension")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    centered = xd - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    gd, bd = gamma.data, beta.data
    out = xhat * gd + bd
    reduce_axes = tuple(range(xd.ndim - 1))

    def backward(g):
        dxhat = g * gd
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    return _result(out, (x, gamma, beta), backward)


def embedding(weight: Tensor, indices) -> Tensor:
    idx = np.asarray(indices)
    wd = weight.data

    def backward(g):
        full = np.zeros_like(wd)
        np.add.at(full, idx.reshape(-1), g.reshape(-1, wd.shape[-1]))
        return (full,)

    return _result(wd[idx], (weight,), backward)


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    """Inverted dropout: keep with prob ``1-p`` and scale by ``1/(1-p)``; identity at eval."""
    if not training or p <= 0.0:
        return x
    if p >= 1.0:
        return x * 0.0
    if rng is None:
        raise ContractError("dropout in training mode needs a seeded generator")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return mul(x, Tensor(keep, dtype=x.dtype))


def lstm_recurrence(gates_in: Tensor, w_hh: Tensor, return_gates: bool = False):
    """Run an LSTM over precomputed input projections.

    ``gates_in`` has shape ``(B, n, 4H)`` holding ``x_t W_ih + b`` in gate
    order (input, forget, cell, output); ``w_hh`` has shape ``(H, 4H)``.
    Returns hidden states ``(B, n, H)``.  Backpropagation through time is
    done in one fused backward rather than per-timestep graph nodes.
    """
    gx = gates_in.data
    wh = w_hh.data
    B, n, four_h = gx.shape
    H = four_h // 4
    if wh.shape != (H, four_h):
        raise DimensionError(f"w_hh shape {wh.shape} does not match hidden size {H}")
    dtype = gx.dtype
    hs = np.zeros((B, n, H), dtype=dtype)
    cs = np.zeros((B, n, H), dtype=dtype)
    acts = np.zeros((B, n, four_h), dtype=dtype)
    h = np.zeros((B, H), dtype=dtype)
    c = np.zeros((B, H), dtype=dtype)
    for t in range(n):
        z = gx[:, t] + h @ wh
        a = acts[:, t]
        a[:, : 2 * H] = _sigmoid(z[:, : 2 * H])
        a[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
        a[:, 3 * H :] = _sigmoid(z[:, 3 * H :])
        i, f, g, o = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
        c = f * c + i * g
        h = o * np.tanh(c)
        cs[:, t] = c
        hs[:, t] = h

    def backward(grad_h):
        dz = np.zeros_like(acts)
        dh_next = np.zeros((B, H), dtype=dtype)
        dc_next = np.zeros((B, H), dtype=dtype)
        zeros = np.zeros((B, H), dtype=dtype)
        for t in range(n - 1, -1, -1):
            a = acts[:, t]
            i, f, g, o = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
            tc = np.tanh(cs[:, t])
            c_prev = cs[:, t - 1] if t > 0 else zeros
            dh = grad_h[:, t] + dh_next
            dc = dh * o * (1 - tc * tc) + dc_next
            d = dz[:, t]
            d[:, :H] = dc * g * i * (1 - i)
            d[:, H : 2 * H] = dc * c_prev * f * (1 - f)
            d[:, 2 * H : 3 * H] = dc * i * (1 - g * g)
            d[:, 3 * H :] = dh * tc * o * (1 - o)
            dc_next = dc * f
            dh_next = d @ wh.T
        h_prev = np.concatenate([np.zeros((B, 1, H), dtype=dtype), hs[:, :-1]], axis=1)
        dwh = h_prev.reshape(-1, H).T @ dz.reshape(-1, four_h)
        return dz, dwh

    out = _result(hs, (gates_in, w_hh), backward)
    if return_gates:
        return out, acts, cs
    return out


# ---------------------------------------------------------------------------
# finite-difference gradient check
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    per_parameter_errors: dict[str, float]

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol


def gradcheck(
    fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
    floor: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients of ``fn()`` with central finite differences.

    ``fn`` must rebuild the scalar loss from ``params`` on every call and be
    deterministic.  Parameters must be float64.  The per-parameter error is
    ``max|analytic - numeric| / max(max|analytic|, max|numeric|, floor)``
    over the checked entries (all of them, or ``max_entries`` sampled).
    """
    for name, p in params.items():
        if p.dtype != np.float64:
            raise ContractError(f"gradcheck needs float64 parameters; {name} is {p.dtype}")
        p.zero_grad()
    loss = fn()
    loss.backward()
    analytic = {name: (p.grad if p.grad is not None else np.zeros_like(p.data)).copy() for name, p in params.items()}

    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        if max_entries is not None and flat.size > max_entries:
            entries = rng.choice(flat.size, size=max_entries, replace=False)
        else:
            entries = np.arange(flat.size)
        numeric = np.empty(len(entries))
        with no_grad():
            for k, e in enumerate(entries):
                orig = flat[e]
                flat[e] = orig + h
                fp = float(fn().data)
                flat[e] = orig - h
                fm = float(fn().data)
                flat[e] = orig
                numeric[k] = (fp - fm) / (2 * h)
        a = analytic[name].reshape(-1)[entries]
        scale = max(np.abs(a).max(initial=0.0), np.abs(numeric).max(initial=0.0), floor)
        errors[name] = float(np.abs(a - numeric).max(initial=0.0) / scale)
        p.zero_grad()
    return GradCheckReport(max(errors.values(), default=0.0), errors)
