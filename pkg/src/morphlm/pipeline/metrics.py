"""Evaluation metrics for downstream tasks."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import stats


class UndefinedMetricError(ValueError):
    """The metric has no value for these inputs (e.g. a constant series)."""


def accuracy(gold: Sequence, pred: Sequence) -> float:
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    if not gold:
        raise UndefinedMetricError("accuracy of an empty set")
    return sum(g == p for g, p in zip(gold, pred)) / len(gold)


def spans(labels: Sequence[str], outside: str = "O") -> set[tuple[int, int, str]]:
    """(start, end exclusive, type) entity spans from BIO labels.

    ``B-X`` opens a span, ``I-X`` continues one of type X (or opens one when
    it does not follow X), and a bare ``X`` is treated as ``I-X``.
    """
    out = set()
    start, kind = None, None
    for i, lab in enumerate(list(labels) + [outside]):
        if lab == outside:
            tag, t = "O", None
        elif lab.startswith("B-"):
            tag, t = "B", lab[2:]
        elif lab.startswith("I-"):
            tag, t = "I", lab[2:]
        else:
            tag, t = "I", lab
        if kind is not None and (tag != "I" or t != kind):
            out.add((start, i, kind))
            kind = None
        if tag == "B" or (tag == "I" and kind is None):
            start, kind = i, t
    return out


def f1_micro(gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]], outside: str = "O") -> float:
    """Span-level micro F1 over all sentences; exact span and type must match."""
    if len(gold) != len(pred):
        raise ValueError("gold and predicted sentence counts differ")
    tp = n_gold = n_pred = 0
    for g, p in zip(gold, pred):
        if len(g) != len(p):
            raise ValueError("gold and predicted sentence lengths differ")
        gs, ps = spans(g, outside), spans(p, outside)
        tp += len(gs & ps)
        n_gold += len(gs)
        n_pred += len(ps)
    if n_gold == 0 and n_pred == 0:
        raise UndefinedMetricError("F1 with no gold and no predicted spans")
    if tp == 0:
        return 0.0
    prec, rec = tp / n_pred, tp / n_gold
    return 2 * prec * rec / (prec + rec)


def _check_series(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("correlation needs two 1-D series of equal length")
    if len(x) < 2:
        raise UndefinedMetricError("correlation needs at least two points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedMetricError("correlation of a constant series is undefined")
    return x, y


def pearson(x, y) -> float:
    x, y = _check_series(x, y)
    return float(stats.pearsonr(x, y)[0])


def spearman(x, y) -> float:
    x, y = _check_series(x, y)
    return float(stats.spearmanr(x, y)[0])
