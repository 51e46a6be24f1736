"""Greedy bidirectional decoding and the Viterbi baseline, both in log space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .emission import EmissionEntry
from .transitions import TransitionTables


@dataclass(frozen=True)
class Decoded:
    tags: list[str]
    log_scores: list[float]     # log P~(y_t | x) at the moment token t was decoded
    order: list[int]
    entries: list[EmissionEntry]


def _best_per_tag(entries: Sequence[EmissionEntry]) -> dict[str, EmissionEntry]:
    best: dict[str, EmissionEntry] = {}
    for e in entries:
        cur = best.get(e.tag)
        if cur is None or e.log_mapped > cur.log_mapped:
            best[e.tag] = e
    return best


def _pick(cands, precedence: Mapping[str, float] | None, index: Mapping[str, int]):
    """Maximize score, then precedence weight, then prefer the lower tag id."""
    prec = precedence or {}
    return max(cands, key=lambda c: (c[0], prec.get(c[1].tag, 0.0), -index[c[1].tag]))


def decode_bidirectional(
    entries: Sequence[Sequence[EmissionEntry]],
    tables: TransitionTables,
    precedence: Mapping[str, float] | None = None,
) -> Decoded:
    n = len(entries)
    if n == 0:
        raise ValueError("cannot decode an empty sentence")
    index = tables.index
    lf, lb, l3 = np.log(tables.forward), np.log(tables.backward), np.log(tables.both_sides)
    per_tok = []
    for t, tok in enumerate(entries):
        if not tok:
            raise ValueError(f"token {t} has no candidate tags")
        best = _best_per_tag(tok)
        for tag in best:
            if tag not in index:
                raise KeyError(f"tag {tag!r} not in transition tables")
        per_tok.append(best)

    key = [max(e.log_mapped for e in best.values()) for best in per_tok]
    order = sorted(range(n), key=lambda t: (-key[t], t))
    chosen: list[EmissionEntry | None] = [None] * n
    scores = [0.0] * n
    for t in order:
        left = chosen[t - 1] if t > 0 else None
        right = chosen[t + 1] if t + 1 < n else None
        cands = []
        for e in per_tok[t].values():
            y = index[e.tag]
            s = e.log_mapped
            if left is not None and right is not None:
                s += l3[index[left.tag], index[right.tag], y] + scores[t - 1] + scores[t + 1]
            elif left is not None:
                s += lf[index[left.tag], y] + scores[t - 1]
            elif right is not None:
                s += lb[index[right.tag], y] + scores[t + 1]
            cands.append((s, e))
        s, e = _pick(cands, precedence, index)
        chosen[t] = e
        scores[t] = s
    return Decoded([e.tag for e in chosen], scores, order, chosen)


def decode_viterbi(
    entries: Sequence[Sequence[EmissionEntry]],
    tables: TransitionTables,
) -> Decoded:
    """Exact argmax of sum_t log e_t(y_t) + sum_{t>=1} log P(y_t | y_{t-1}).

    Candidates are visited in tag-id order and only strict improvements replace
    a back-pointer, so ties resolve to the lowest tag ids.
    """
    n = len(entries)
    if n == 0:
        raise ValueError("cannot decode an empty sentence")
    index = tables.index
    lf = np.log(tables.forward)
    cands = []
    for t, tok in enumerate(entries):
        if not tok:
            raise ValueError(f"token {t} has no candidate tags")
        best = _best_per_tag(tok)
        cands.append(sorted(best.values(), key=lambda e: index[e.tag]))

    delta = [e.log_mapped for e in cands[0]]
    back: list[list[int]] = []
    for t in range(1, n):
        nd, bp = [], []
        for e in cands[t]:
            y = index[e.tag]
            bi, bs = 0, -np.inf
            for i, p in enumerate(cands[t - 1]):
                s = delta[i] + lf[index[p.tag], y]
                if s > bs:
                    bi, bs = i, s
            nd.append(bs + e.log_mapped)
            bp.append(bi)
        delta = nd
        back.append(bp)
    j = int(np.argmax(delta))
    total = float(delta[j])
    path = [j]
    for bp in reversed(back):
        j = bp[j]
        path.append(j)
    path.reverse()
    chosen = [cands[t][k] for t, k in enumerate(path)]
    return Decoded([e.tag for e in chosen], [total] * n, list(range(n)), chosen)


def emission_argmax(entries: Sequence[Sequence[EmissionEntry]], tables: TransitionTables,
                    precedence: Mapping[str, float] | None = None) -> list[str]:
    index = tables.index
    return [_pick([(e.log_mapped, e) for e in tok], precedence, index)[1].tag for tok in entries]
