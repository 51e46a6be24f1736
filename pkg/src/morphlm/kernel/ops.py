"""Differentiable operations over :class:`Tensor`.

Broadcasting is limited to the trailing-axis case: the second operand of an
elementwise op may have a shape equal to a suffix of the first operand's
shape (e.g. a bias of shape ``(d,)`` against activations ``(n, d)``).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from .tensor import ShapeError, Tensor, as_tensor

LOG_FLOOR = 1e-300


def _suffix_reduce(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    return grad.reshape((-1,) + shape).sum(axis=0) if lead > 0 else grad


def _check_suffix(a: Tensor, b: Tensor, op: str):
    sa, sb = a.shape, b.shape
    if sa == sb:
        return
    if len(sb) <= len(sa) and sa[len(sa) - len(sb):] == sb:
        return
    raise ShapeError(f"{op}: shape {sb} is not a trailing suffix of {sa}")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim > a.ndim:
        a, b = b, a
    _check_suffix(a, b, "add")
    sb = b.shape

    def back(g):
        return g, _suffix_reduce(g, sb)

    return Tensor._from_op(a.data + b.data, (a, b), back, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_suffix(a, b, "sub")
    sb = b.shape

    def back(g):
        return g, -_suffix_reduce(g, sb)

    return Tensor._from_op(a.data - b.data, (a, b), back, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim > a.ndim:
        a, b = b, a
    _check_suffix(a, b, "mul")
    ad, bd, sb = a.data, b.data, b.shape

    def back(g):
        return g * bd, _suffix_reduce(g * ad, sb)

    return Tensor._from_op(ad * bd, (a, b), back, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return Tensor._from_op(a.data * c, (a,), lambda g: (g * c,), "scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes.

    ``b`` is either a matrix (shared across all leading axes of ``a``) or has
    exactly the same leading axes as ``a``.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    ad, bd = a.data, b.data
    if b.ndim == 2:
        k, n = bd.shape

        def back(g):
            ga = g @ bd.T
            gb = ad.reshape(-1, k).T @ g.reshape(-1, n)
            return ga, gb

    elif b.ndim == a.ndim and a.shape[:-2] == b.shape[:-2]:

        def back(g):
            return g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g

    else:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return Tensor._from_op(ad @ bd, (a, b), back, "matmul")


def sum(x: Tensor, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    shape = x.shape
    if axis is None:
        out = np.asarray(x.data.sum())

        def back(g):
            return (np.broadcast_to(g, shape).copy(),)

    else:
        ax = axis % x.ndim
        out = x.data.sum(axis=ax)

        def back(g):
            return (np.broadcast_to(np.expand_dims(g, ax), shape).copy(),)

    return Tensor._from_op(out, (x,), back, "sum")


def mean(x: Tensor, axis=None) -> Tensor:
    n = x.size if axis is None else x.shape[axis]
    return scale(sum(x, axis), 1.0 / n)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {old} into {tuple(shape)}") from exc
    return Tensor._from_op(out, (x,), lambda g: (g.reshape(old),), "reshape")


def permute(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = np.ascontiguousarray(np.transpose(x.data, axes))
    return Tensor._from_op(out, (x,), lambda g: (np.transpose(g, inv),), "permute")


def concat(xs, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    ax = axis % xs[0].ndim
    for x in xs[1:]:
        if x.ndim != xs[0].ndim or any(x.shape[i] != xs[0].shape[i] for i in range(x.ndim) if i != ax):
            raise ShapeError(f"concat: incompatible shapes {[t.shape for t in xs]} on axis {axis}")
    sizes = [x.shape[ax] for x in xs]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(xs)))

    return Tensor._from_op(np.concatenate([x.data for x in xs], axis=ax), xs, back, "concat")


def index_select(x: Tensor, axis: int, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    ax = axis % x.ndim
    n = x.shape[ax]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"index_select: indices out of range for axis of length {n}")
    shape = x.shape

    def back(g):
        out = np.zeros(shape)
        moved = np.moveaxis(out, ax, 0)
        np.add.at(moved, idx.reshape(-1), np.moveaxis(g, ax, 0).reshape((-1,) + moved.shape[1:]))
        return (out,)

    return Tensor._from_op(np.take(x.data, idx, axis=ax), (x,), back, "index_select")


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Rows of ``table`` selected by an integer array of any shape."""
    ids = np.asarray(ids)
    if ids.size and not np.issubdtype(ids.dtype, np.integer):
        raise TypeError("embedding ids must be integers")
    ids = ids.astype(np.int64)
    v = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= v):
        bad = ids[(ids < 0) | (ids >= v)].ravel()[0]
        raise IndexError(f"embedding id {bad} out of range for table with {v} rows")
    shape = table.shape

    def back(g):
        out = np.zeros(shape)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, shape[1]))
        return (out,)

    return Tensor._from_op(table.data[ids], (table,), back, "embedding")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    xd = np.maximum(x.data, LOG_FLOOR)
    return Tensor._from_op(np.log(xd), (x,), lambda g: (g / xd,), "log")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, ``x * Phi(x)``."""
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd * _INV_SQRT2))

    def back(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * xd * xd)
        return (g * (cdf + xd * pdf),)

    return Tensor._from_op(xd * cdf, (x,), back, "gelu")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(out, (x,), back, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.maximum(np.exp(z).sum(axis=axis, keepdims=True), LOG_FLOOR))
    out = z - lse

    def back(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return Tensor._from_op(out, (x,), back, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} do not match last axis {d}")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    var = ((xd - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu) * inv
    gd = gain.data

    def back(g):
        dxhat = g * gd
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return Tensor._from_op(xhat * gd + bias.data, (x, gain, bias), back, "layer_norm")


def dropout(x: Tensor, p: float, seed: int | None, training: bool = True) -> Tensor:
    """Inverted dropout with an explicit seed; identity when ``p == 0``."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if seed is None:
        raise ValueError("dropout needs an explicit seed when active")
    keep = np.random.default_rng(seed).random(x.shape) >= p
    m = keep / (1.0 - p)
    return Tensor._from_op(x.data * m, (x,), lambda g: (g * m,), "dropout")


def _check_targets(targets, n_rows: int, n_classes: int) -> np.ndarray:
    t = np.asarray(targets, dtype=np.int64).reshape(-1)
    if t.shape[0] != n_rows:
        raise ShapeError(f"expected {n_rows} targets, got {t.shape[0]}")
    bad = (t < 0) | (t >= n_classes)
    if bad.any():
        raise IndexError(f"target index {int(t[bad][0])} out of range for {n_classes} classes")
    return t


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-softmax probability of ``targets``."""
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects logits [b, V], got {logits.shape}")
    b, v = logits.shape
    t = _check_targets(targets, b, v)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=1, keepdims=True)
    logp = z - np.log(s)
    loss = -logp[np.arange(b), t].mean()

    def back(g):
        d = e / s
        d[np.arange(b), t] -= 1.0
        return (d * (g / b),)

    return Tensor._from_op(np.asarray(loss), (logits,), back, "cross_entropy")


def kl_divergence(target, predicted_log_probs: Tensor, atol: float = 1e-9) -> Tensor:
    """Mean over rows of ``sum_i t_i (ln t_i - log_pred_i)``.

    ``target`` is treated as a constant.  Cells where the target is zero
    contribute nothing, whatever the prediction.
    """
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    lp = predicted_log_probs
    if t.shape != lp.shape or t.ndim != 2:
        raise ShapeError(f"kl_divergence: target {t.shape} vs predictions {lp.shape}")
    if (t < 0).any():
        raise ValueError("kl_divergence: target has negative entries")
    rows = t.sum(axis=1)
    if np.abs(rows - 1.0).max() > atol:
        i = int(np.argmax(np.abs(rows - 1.0)))
        raise ValueError(f"kl_divergence: target row {i} sums to {rows[i]!r}, not 1")
    b = t.shape[0]
    pos = t > 0
    tlog = np.where(pos, np.log(np.where(pos, t, 1.0)), 0.0)
    cell = np.where(pos, t * (tlog - lp.data), 0.0)
    loss = cell.sum() / b

    def back(g):
        return (-t * (g / b),)

    return Tensor._from_op(np.asarray(loss), (lp,), back, "kl_divergence")
