"""Corpus-level transition count tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .emission import EmissionEntry, marginals

DEFAULT_ALPHA = 0.1
BACKOFF_MIN_COUNT = 5.0


@dataclass
class TransitionCounts:
    """Marginal-weighted pair and triple counts.

    ``pair[a, b]``: weight of tag ``a`` at t-1 followed by ``b`` at t.
    ``triple[a, c, b]``: ``a`` at t-1, ``b`` at t, ``c`` at t+1 (indexed prev, next, cur).
    Counts from disjoint shards combine with ``+``.
    """

    tags: list[str]
    pair: np.ndarray = field(default=None)
    triple: np.ndarray = field(default=None)
    n_tokens: int = 0

    def __post_init__(self):
        k = len(self.tags)
        self._index = {t: i for i, t in enumerate(self.tags)}
        if self.pair is None:
            self.pair = np.zeros((k, k))
        if self.triple is None:
            self.triple = np.zeros((k, k, k))

    def _vec(self, entries: Sequence[EmissionEntry]) -> np.ndarray:
        v = np.zeros(len(self.tags))
        for tag, p in marginals(entries).items():
            if tag not in self._index:
                raise KeyError(f"tag {tag!r} not in table inventory")
            v[self._index[tag]] += p
        return v

    def add_sentence(self, sentence: Sequence[Sequence[EmissionEntry]]):
        vs = [self._vec(tok) for tok in sentence]
        self.n_tokens += len(vs)
        for t in range(1, len(vs)):
            self.pair += np.outer(vs[t - 1], vs[t])
        for t in range(1, len(vs) - 1):
            self.triple += np.einsum("a,c,b->acb", vs[t - 1], vs[t + 1], vs[t])

    def __add__(self, other: "TransitionCounts") -> "TransitionCounts":
        if self.tags != other.tags:
            raise ValueError("cannot merge counts over different tag inventories")
        return TransitionCounts(list(self.tags), self.pair + other.pair, self.triple + other.triple,
                                self.n_tokens + other.n_tokens)


def _rows(x: np.ndarray) -> np.ndarray:
    return x / x.sum(axis=-1, keepdims=True)


@dataclass
class TransitionTables:
    tags: list[str]
    forward: np.ndarray       # [prev, cur] = P(cur | prev)
    backward: np.ndarray      # [next, cur] = P(cur | next)
    both_sides: np.ndarray    # [prev, next, cur] = P(cur | prev, next), after back-off
    context_counts: np.ndarray
    alpha: float = DEFAULT_ALPHA
    counts: TransitionCounts | None = None

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tags)}

    @classmethod
    def from_counts(cls, counts: TransitionCounts, alpha: float = DEFAULT_ALPHA,
                    backoff_min_count: float = BACKOFF_MIN_COUNT) -> "TransitionTables":
        if alpha <= 0:
            raise ValueError("smoothing alpha must be > 0")
        fwd = _rows(counts.pair + alpha)
        bwd = _rows(counts.pair.T + alpha)
        ctx = counts.triple.sum(axis=-1)
        both = _rows(counts.triple + alpha)
        backoff = _rows(fwd[:, None, :] * bwd[None, :, :])
        mask = ctx < backoff_min_count
        both = np.where(mask[..., None], backoff, both)
        return cls(list(counts.tags), fwd, bwd, both, ctx, alpha, counts)

    @classmethod
    def uniform(cls, tags: Sequence[str]) -> "TransitionTables":
        k = len(tags)
        return cls(list(tags), np.full((k, k), 1.0 / k), np.full((k, k), 1.0 / k),
                   np.full((k, k, k), 1.0 / k), np.zeros((k, k)), float("inf"))

    def to_json(self) -> str:
        doc = {
            "axes": {"forward": ["previous", "current"], "backward": ["next", "current"],
                     "both_sides": ["previous", "next", "current"]},
            "tags": self.tags,
            "alpha": self.alpha,
            "forward": self.forward.tolist(),
            "backward": self.backward.tolist(),
            "both_sides": self.both_sides.tolist(),
            "context_counts": self.context_counts.tolist(),
        }
        if self.counts is not None:
            doc["pair_counts"] = self.counts.pair.tolist()
            doc["triple_counts"] = self.counts.triple.tolist()
            doc["n_tokens"] = self.counts.n_tokens
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TransitionTables":
        d = json.loads(text)
        counts = None
        if "pair_counts" in d:
            counts = TransitionCounts(d["tags"], np.array(d["pair_counts"], dtype=float),
                                      np.array(d["triple_counts"], dtype=float), int(d.get("n_tokens", 0)))
        return cls(d["tags"], np.array(d["forward"]), np.array(d["backward"]),
                   np.array(d["both_sides"]), np.array(d["context_counts"]), float(d["alpha"]), counts)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TransitionTables":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def estimate_transitions(
    corpus: Iterable[Sequence[Sequence[EmissionEntry]]],
    tags: Sequence[str],
    alpha: float = DEFAULT_ALPHA,
    backoff_min_count: float = BACKOFF_MIN_COUNT,
) -> TransitionTables:
    counts = TransitionCounts(list(tags))
    n = 0
    for sentence in corpus:
        if sentence:
            counts.add_sentence(sentence)
            n += 1
    if n == 0:
        raise ValueError("cannot estimate transitions from an empty corpus")
    return TransitionTables.from_counts(counts, alpha, backoff_min_count)
