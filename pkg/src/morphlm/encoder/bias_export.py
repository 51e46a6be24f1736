"""Export of the learned positional attention bias for inspection."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..kernel import no_grad
from .model import PositionalBias, TwoTierEncoder


def positional_bias_matrices(model, length: int) -> np.ndarray:
    """Per-head [H, L, L] word-to-word bias, each matrix z-scored (population std).

    A constant matrix maps to all zeros.
    """
    pb = model.position if isinstance(model, TwoTierEncoder) else model
    if not isinstance(pb, PositionalBias):
        raise TypeError("expected a TwoTierEncoder or PositionalBias")
    with no_grad():
        raw = pb.word_bias(length).data
    mu = raw.mean(axis=(1, 2), keepdims=True)
    sd = raw.std(axis=(1, 2), keepdims=True)
    return np.where(sd > 0, (raw - mu) / np.where(sd > 0, sd, 1.0), 0.0)


def export_positional_bias(model, length: int, out_dir) -> list[Path]:
    """Write one CSV per head, ``head_XX.csv``, rows = query position i, cols = key j."""
    mats = positional_bias_matrices(model, length)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for h, m in enumerate(mats):
        p = out / f"head_{h:02d}.csv"
        np.savetxt(p, m, delimiter=",", fmt="%.17g")
        paths.append(p)
    return paths
