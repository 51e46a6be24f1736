"""Affix-set vocabulary: the most frequent unordered affix combinations."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

EXACT_LIMIT = 12
EMPTY: tuple = ()


def canonical(combo: Iterable[Hashable]) -> tuple:
    return tuple(sorted(set(combo)))


@dataclass
class AffixSetVocab:
    sets: list[tuple]
    freqs: list[int]
    affix_freq: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {s: i for i, s in enumerate(self.sets)}
        if len(self.index) != len(self.sets):
            raise ValueError("affix sets must be unique after canonical sorting")
        if EMPTY not in self.index:
            raise ValueError("affix-set vocabulary must contain the empty set")
        for s in self.sets:
            for a in s:
                self.affix_freq.setdefault(a, 0)

    def __len__(self) -> int:
        return len(self.sets)

    @property
    def empty_id(self) -> int:
        return self.index[EMPTY]

    @property
    def mask_id(self) -> int:
        """Reserved id one past the real sets, used by the masking scheme."""
        return len(self.sets)

    def lookup(self, combo) -> int | None:
        return self.index.get(canonical(combo))

    def save(self, path):
        with Path(path).open("w", encoding="utf-8") as fh:
            for i, (s, f) in enumerate(zip(self.sets, self.freqs)):
                fh.write(f"{i}\t{','.join(str(a) for a in s)}\t{f}\n")

    @classmethod
    def load(cls, path, affix_freq: Mapping | None = None, cast=int) -> "AffixSetVocab":
        sets, freqs = [], []
        with Path(path).open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or int(parts[0]) != len(sets):
                    raise ValueError(f"{path}:{lineno}: expected id<TAB>affixes<TAB>frequency in id order")
                sets.append(tuple(cast(a) for a in parts[1].split(",")) if parts[1] else EMPTY)
                freqs.append(int(parts[2]))
        return cls(sets, freqs, dict(affix_freq or {}))


def build_affix_set_vocab(combos: Iterable[Iterable[Hashable]], n: int,
                          inventory: Iterable[Hashable] = ()) -> AffixSetVocab:
    """Top-``n`` combinations by frequency (ties: lexicographic), plus the empty set.

    ``inventory`` lists affixes that are valid even if unseen in ``combos``.
    """
    if n < 1:
        raise ValueError("affix-set vocabulary size must be >= 1")
    counts: Counter = Counter()
    per_affix: Counter = Counter({a: 0 for a in inventory})
    for c in combos:
        key = canonical(c)
        counts[key] += 1
        for a in key:
            per_affix[a] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]
    sets = [s for s, _ in ranked]
    freqs = [f for _, f in ranked]
    if EMPTY not in sets:
        sets.append(EMPTY)
        freqs.append(counts.get(EMPTY, 0))
    return AffixSetVocab(sets, freqs, dict(per_affix))


def map_affix_set(v: AffixSetVocab, combo: Iterable[Hashable]) -> int:
    """Id of ``combo`` if present, else of its largest in-vocabulary subset.

    Equal-size subsets are ranked by frequency, then by lower id.  The subset
    scan is exact up to ``EXACT_LIMIT`` affixes; longer combinations first shed
    their least frequent affixes down to that limit.
    """
    key = canonical(combo)
    for a in key:
        if a not in v.affix_freq:
            raise ValueError(f"unknown affix id {a!r}")
    hit = v.index.get(key)
    if hit is not None:
        return hit
    if len(key) > EXACT_LIMIT:
        keep = sorted(key, key=lambda a: (-v.affix_freq[a], a))[:EXACT_LIMIT]
        key = canonical(keep)
        hit = v.index.get(key)
        if hit is not None:
            return hit
    for size in range(len(key) - 1, 0, -1):
        best = None
        for sub in itertools.combinations(key, size):
            i = v.index.get(sub)
            if i is not None and (best is None or (v.freqs[i], -i) > (v.freqs[best], -best)):
                best = i
        if best is not None:
            return best
    return v.empty_id
