"""Character-level byte-pair encoding used for unanalyzable words."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

END_OF_WORD = "</w>"


def _merge_pair(symbols: tuple[str, ...], a: str, b: str) -> tuple[str, ...]:
    out = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


@dataclass
class BpeModel:
    base_symbols: list[str]
    merges: list[tuple[str, str]]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def vocab(self) -> list[str]:
        return list(self.base_symbols) + [a + b for a, b in self.merges]

    @property
    def size(self) -> int:
        return len(self.base_symbols) + len(self.merges)

    def encode(self, word: str) -> list[str]:
        hit = self._cache.get(word)
        if hit is None:
            symbols = tuple(word) + (END_OF_WORD,)
            for a, b in self.merges:
                if len(symbols) == 1:
                    break
                symbols = _merge_pair(symbols, a, b)
            hit = self._cache[word] = list(symbols)
        return list(hit)

    @staticmethod
    def decode(tokens: Sequence[str]) -> str:
        return "".join(tokens).replace(END_OF_WORD, "")

    def save(self, path):
        lines = ["#base"] + list(self.base_symbols) + ["#merges"] + [f"{a} {b}" for a, b in self.merges]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "BpeModel":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if not lines or lines[0] != "#base" or "#merges" not in lines:
            raise ValueError(f"{path}: not a BPE model file")
        cut = lines.index("#merges")
        base = lines[1:cut]
        merges = []
        for lineno, line in enumerate(lines[cut + 1:], cut + 2):
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: merge line must hold two symbols")
            merges.append((parts[0], parts[1]))
        return cls(base, merges)


def word_frequencies(text_or_words) -> Counter:
    if isinstance(text_or_words, str):
        return Counter(text_or_words.split())
    c: Counter = Counter()
    for w in text_or_words:
        c.update(w.split())
    return c


def train_bpe(corpus, target_size: int) -> BpeModel:
    """Greedy most-frequent-pair merging until ``target_size`` symbols exist.

    ``corpus`` is raw text or an iterable of lines.  Pair counts include
    overlapping occurrences; frequency ties go to the lexicographically
    smallest pair.  Training stops early when no pair remains.
    """
    freqs = word_frequencies(corpus)
    if not freqs:
        raise ValueError("cannot train BPE on an empty corpus")
    words = {tuple(w) + (END_OF_WORD,): f for w, f in sorted(freqs.items())}
    base = sorted({ch for w in freqs for ch in w}) + [END_OF_WORD]
    if target_size < len(base):
        raise ValueError(f"target size {target_size} below base symbol count {len(base)}")
    merges: list[tuple[str, str]] = []
    while len(base) + len(merges) < target_size:
        pairs: Counter = Counter()
        for sym, f in words.items():
            for p in zip(sym, sym[1:]):
                pairs[p] += f
        if not pairs:
            break
        best = min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        merges.append(best)
        words = {_merge_pair(sym, *best): f for sym, f in words.items()}
    return BpeModel(base, merges)
