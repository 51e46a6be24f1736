"""Embedding-table vocabularies and word-to-WordPiece tokenization."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..morphology import FALLBACK_TAG, Analysis, Grammar
from .affix_sets import AffixSetVocab, build_affix_set_vocab, map_affix_set
from .bpe import END_OF_WORD, BpeModel, train_bpe

PAD, UNK, MASK, SEP = "[PAD]", "[UNK]", "[MASK]", "[SEP]"
STEM_SPECIALS = [PAD, UNK, MASK, SEP]
POS_SPECIALS = [PAD, MASK]
BPE_PREFIX = "bpe:"


@dataclass(frozen=True)
class WordPiece:
    stem_id: int
    affix_ids: tuple[int, ...]
    affix_set_id: int
    pos_tag_id: int
    is_bpe: bool = False
    surface: str = ""


def _read_lines(path) -> list[str]:
    return [l for l in Path(path).read_text(encoding="utf-8").split("\n") if l]


class Vocab:
    def __init__(self, stems: Sequence[str], pos_tags: Sequence[str], affixes: Sequence[str],
                 affix_sets: AffixSetVocab, bpe: BpeModel):
        self.stems = list(stems)
        self.pos_tags = list(pos_tags)
        self.affixes = list(affixes)
        self.affix_sets = affix_sets
        self.bpe = bpe
        self.stem_index = {s: i for i, s in enumerate(self.stems)}
        self.pos_index = {s: i for i, s in enumerate(self.pos_tags)}
        self.affix_index = {s: i for i, s in enumerate(self.affixes)}
        for name, table in (("stem", self.stems), ("POS", self.pos_tags), ("affix", self.affixes)):
            if len(set(table)) != len(table):
                raise ValueError(f"duplicate entries in {name} vocabulary")
        if self.stems[: len(STEM_SPECIALS)] != STEM_SPECIALS:
            raise ValueError(f"stem vocabulary must start with {STEM_SPECIALS}")
        if self.pos_tags[: len(POS_SPECIALS)] != POS_SPECIALS:
            raise ValueError(f"POS vocabulary must start with {POS_SPECIALS}")
        if FALLBACK_TAG not in self.pos_index:
            raise ValueError(f"POS vocabulary lacks {FALLBACK_TAG}")

    # sizes used by the encoder
    @property
    def n_stems(self) -> int:
        return len(self.stems)

    @property
    def n_pos(self) -> int:
        return len(self.pos_tags)

    @property
    def n_affixes(self) -> int:
        return len(self.affixes)

    @property
    def n_affix_sets(self) -> int:
        """Rows of the affix-set table: the real sets plus the [MASK] row."""
        return len(self.affix_sets) + 1

    @property
    def stem_mask_id(self) -> int:
        return self.stem_index[MASK]

    @property
    def stem_pad_id(self) -> int:
        return self.stem_index[PAD]

    @property
    def pos_mask_id(self) -> int:
        return self.pos_index[MASK]

    @property
    def n_special_stems(self) -> int:
        return len(STEM_SPECIALS)

    def stem_id(self, stem: str) -> int:
        return self.stem_index.get(stem, self.stem_index[UNK])

    def affix_id(self, affix: str) -> int:
        try:
            return self.affix_index[affix]
        except KeyError:
            raise ValueError(f"unknown affix {affix!r}") from None

    def piece(self, stem: str, pos_tag: str, affixes: Sequence[str], surface: str = "") -> WordPiece:
        """WordPiece from the string fields of a parsed-corpus line."""
        is_bpe = stem.startswith(BPE_PREFIX)
        ids = tuple(self.affix_id(a) for a in affixes)
        if is_bpe and ids:
            raise ValueError("BPE pieces cannot carry affixes")
        aset = self.affix_sets.empty_id if is_bpe else map_affix_set(self.affix_sets, ids)
        if pos_tag not in self.pos_index:
            raise ValueError(f"unknown POS tag {pos_tag!r}")
        return WordPiece(self.stem_id(stem), ids, aset, self.pos_index[pos_tag], is_bpe, surface)

    def bpe_pieces(self, word: str) -> list[tuple[str, str]]:
        """(display text, stem key) for each BPE token of ``word``.

        A token that is only the end-of-word marker displays as the marker, so
        no parsed-corpus line has an empty surface.
        """
        toks = self.bpe.encode(word)
        return [(t.replace(END_OF_WORD, "") or END_OF_WORD, BPE_PREFIX + t) for t in toks]

    # -- persistence --------------------------------------------------------

    def save(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "stems.txt").write_text("\n".join(self.stems) + "\n", encoding="utf-8")
        (d / "pos_tags.txt").write_text("\n".join(self.pos_tags) + "\n", encoding="utf-8")
        aff = [f"{a}\t{self.affix_sets.affix_freq.get(i, 0)}" for i, a in enumerate(self.affixes)]
        (d / "affixes.txt").write_text("\n".join(aff) + ("\n" if aff else ""), encoding="utf-8")
        self.affix_sets.save(d / "affix_sets.tsv")
        self.bpe.save(d / "bpe.txt")

    @classmethod
    def load(cls, directory) -> "Vocab":
        d = Path(directory)
        for name in ("stems.txt", "pos_tags.txt", "affixes.txt", "affix_sets.tsv", "bpe.txt"):
            if not (d / name).exists():
                raise FileNotFoundError(f"vocabulary file missing: {d / name}")
        affixes, freq = [], {}
        for i, line in enumerate(_read_lines(d / "affixes.txt")):
            a, f = line.split("\t")
            affixes.append(a)
            freq[i] = int(f)
        sets = AffixSetVocab.load(d / "affix_sets.tsv", freq)
        return cls(_read_lines(d / "stems.txt"), _read_lines(d / "pos_tags.txt"), affixes, sets,
                   BpeModel.load(d / "bpe.txt"))


def tokenize_word(a: Analysis, vocab: Vocab) -> list[WordPiece]:
    if a.is_bpe_fallback:
        return [vocab.piece(key, FALLBACK_TAG, (), text) for text, key in vocab.bpe_pieces(a.surface)]
    return [vocab.piece(a.stem, a.pos_tag, a.affixes, a.surface)]


def build_vocab(grammar: Grammar, analyses: Iterable[Analysis], bpe_corpus: Iterable[str],
                n_affix_sets: int = 64, bpe_size: int = 128) -> Vocab:
    """Stem, POS, affix and affix-set tables from the chosen analyses of a corpus.

    Stems and affixes come from the grammar inventory, so ids do not depend on
    which morphemes the corpus happens to contain.  BPE is trained on every
    surface word; ``bpe_size`` is raised to the base-symbol count if needed.
    """
    affixes = [m.id for m in grammar.affixes]
    aidx = {a: i for i, a in enumerate(affixes)}
    combos = [tuple(aidx[x] for x in a.affixes) for a in analyses if not a.is_bpe_fallback]
    sets = build_affix_set_vocab(combos, n_affix_sets, inventory=range(len(affixes)))
    words = [w for line in bpe_corpus for w in line.split()]
    base = len({ch for w in words for ch in w}) + 1
    bpe = train_bpe(words, max(bpe_size, base)) if words else BpeModel([END_OF_WORD], [])
    stems = STEM_SPECIALS + [m.id for m in grammar.stems]
    stems += [BPE_PREFIX + t for t in bpe.vocab if BPE_PREFIX + t not in stems]
    pos = POS_SPECIALS + grammar.tag_names
    return Vocab(stems, pos, affixes, sets, bpe)
