"""Pre-norm transformer blocks shared by both tiers."""

from __future__ import annotations

import math

import numpy as np

from .. import kernel as K
from ..kernel.nn import LayerNorm, Linear, Module

NEG = -1e9


def key_mask_bias(valid: np.ndarray, heads: int) -> np.ndarray:
    """Additive [N, H, L, L] mask that blocks attention to invalid keys."""
    n, l = valid.shape
    row = np.where(valid, 0.0, NEG)[:, None, None, :]
    return np.broadcast_to(row, (n, heads, l, l)).copy()


def split_heads(x, heads: int):
    n, l, d = x.shape
    return K.permute(K.reshape(x, (n, l, heads, d // heads)), (0, 2, 1, 3))


def merge_heads(x):
    n, h, l, s = x.shape
    return K.reshape(K.permute(x, (0, 2, 1, 3)), (n, l, h * s))


class SelfAttention(Module):
    def __init__(self, init, hidden: int, heads: int, scale: float | None = None):
        self.q = Linear(init, hidden, hidden)
        self.k = Linear(init, hidden, hidden)
        self.v = Linear(init, hidden, hidden)
        self.o = Linear(init, hidden, hidden)
        self.heads = heads
        self.scale = scale if scale is not None else 1.0 / math.sqrt(hidden // heads)

    def scores(self, x):
        q = split_heads(self.q(x), self.heads)
        k = split_heads(self.k(x), self.heads)
        return K.scale(K.matmul(q, K.permute(k, (0, 1, 3, 2))), self.scale)

    def __call__(self, x, bias=None, mask=None):
        s = self.scores(x)
        if bias is not None:
            s = K.add(s, bias)
        if mask is not None:
            s = K.add(s, K.Tensor(mask))
        p = K.softmax(s, axis=-1)
        return self.o(merge_heads(K.matmul(p, split_heads(self.v(x), self.heads))))


class FeedForward(Module):
    def __init__(self, init, hidden: int, inner: int):
        self.up = Linear(init, hidden, inner)
        self.down = Linear(init, inner, hidden)

    def __call__(self, x):
        return self.down(K.gelu(self.up(x)))


class Block(Module):
    def __init__(self, init, hidden: int, heads: int, inner: int, scale: float | None = None):
        self.ln1 = LayerNorm(init, hidden)
        self.attn = SelfAttention(init, hidden, heads, scale)
        self.ln2 = LayerNorm(init, hidden)
        self.ffn = FeedForward(init, hidden, inner)

    def __call__(self, x, bias=None, mask=None, drop=None):
        h = self.attn(self.ln1(x), bias, mask)
        if drop is not None:
            h = drop(h)
        x = K.add(x, h)
        h = self.ffn(self.ln2(x))
        if drop is not None:
            h = drop(h)
        return K.add(x, h)


def relative_buckets(length: int, n_buckets: int = 32, max_distance: int = 128) -> np.ndarray:
    """Bucket of (j - i) for every query i, key j: half the buckets per sign,
    exact for short distances and log-spaced up to ``max_distance``."""
    rel = np.arange(length)[None, :] - np.arange(length)[:, None]
    half = n_buckets // 2
    out = np.where(rel > 0, half, 0)
    n = np.abs(rel)
    exact = max(half // 2, 1)
    with np.errstate(divide="ignore"):
        large = exact + (np.log(np.maximum(n, 1) / exact) / math.log(max(max_distance / exact, 1.0 + 1e-9))
                         * (half - exact)).astype(np.int64)
    large = np.minimum(large, half - 1)
    return (out + np.where(n < exact, n, large)).astype(np.int64)
