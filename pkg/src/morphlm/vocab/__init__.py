"""Stem, affix, affix-set and BPE vocabularies."""

from .affix_sets import EXACT_LIMIT, AffixSetVocab, build_affix_set_vocab, canonical, map_affix_set
from .bpe import END_OF_WORD, BpeModel, train_bpe
from .vocab import (
    BPE_PREFIX, MASK, PAD, POS_SPECIALS, SEP, STEM_SPECIALS, UNK, Vocab, WordPiece, build_vocab,
    tokenize_word,
)

__all__ = [
    "EXACT_LIMIT", "AffixSetVocab", "build_affix_set_vocab", "canonical", "map_affix_set",
    "END_OF_WORD", "BpeModel", "train_bpe", "BPE_PREFIX", "MASK", "PAD", "POS_SPECIALS", "SEP",
    "STEM_SPECIALS", "UNK", "Vocab", "WordPiece", "build_vocab", "tokenize_word",
]
