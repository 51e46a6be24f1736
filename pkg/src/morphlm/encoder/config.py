"""Model configuration and its dimension checks."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Mapping

VARIANTS = ("ASC", "ADR", "AVG", "STEM_ONLY")
FEATURE_SLOTS = {"ASC": 4, "ADR": 4, "AVG": 4, "STEM_ONLY": 0}


class ConfigError(ValueError):
    """A model configuration violates a dimension or vocabulary constraint."""


@dataclass(frozen=True)
class MorphoConfig:
    layers: int = 4
    heads: int = 4
    hidden: int = 128
    head_size: int = 32
    ffn: int = 512
    morph_embed_dim: int = 128


@dataclass(frozen=True)
class SentenceConfig:
    layers: int = 12
    heads: int = 12
    hidden: int = 768
    head_size: int = 64
    ffn: int = 3072
    stem_embed_dim: int = 256


@dataclass(frozen=True)
class VocabSizes:
    stems: int = 34000
    pos: int = 200
    affixes: int = 300
    affix_sets: int = 34000   # rows of the affix-set table, including its [MASK] row


@dataclass(frozen=True)
class ModelConfig:
    morpho: MorphoConfig = field(default_factory=MorphoConfig)
    sentence: SentenceConfig = field(default_factory=SentenceConfig)
    variant: str = "ASC"
    vocab: VocabSizes = field(default_factory=VocabSizes)
    max_positions: int = 512
    rel_buckets: int = 32
    rel_max_distance: int = 128
    max_affixes: int = 12
    dropout: float = 0.0
    init_std: float = 0.02

    def __post_init__(self):
        self.validate()

    @property
    def feature_slots(self) -> int:
        return FEATURE_SLOTS[self.variant]

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        m, s = self.morpho, self.sentence
        want = self.feature_slots * m.hidden + s.stem_embed_dim
        if want != s.hidden:
            raise ConfigError(
                f"dimension identity violated: {self.feature_slots} x {m.hidden} + {s.stem_embed_dim}"
                f" = {want} != sentence hidden {s.hidden}")
        for name, blk in (("morpho", m), ("sentence", s)):
            for k, v in asdict(blk).items():
                if not isinstance(v, int) or v < 1:
                    raise ConfigError(f"{name}.{k} must be a positive integer, got {v!r}")
            if blk.heads * blk.head_size != blk.hidden:
                raise ConfigError(f"{name}: heads x head_size = {blk.heads * blk.head_size} != hidden {blk.hidden}")
        if self.variant != "STEM_ONLY" and m.morph_embed_dim != m.hidden:
            raise ConfigError("morph_embed_dim must equal morpho.hidden (no input projection)")
        for k, v in asdict(self.vocab).items():
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"vocab.{k} must be a positive integer, got {v!r}")
        if self.rel_buckets < 2 or self.rel_buckets % 2:
            raise ConfigError("rel_buckets must be an even number >= 2")
        if self.max_positions < 1 or self.max_affixes < 0:
            raise ConfigError("max_positions must be >= 1 and max_affixes >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelConfig":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown model config keys: {sorted(extra)}")
        try:
            if "morpho" in d:
                d["morpho"] = MorphoConfig(**d["morpho"])
            if "sentence" in d:
                d["sentence"] = SentenceConfig(**d["sentence"])
            if "vocab" in d:
                d["vocab"] = VocabSizes(**d["vocab"])
        except TypeError as exc:
            raise ConfigError(f"bad model config: {exc}") from None
        return cls(**d)

    def with_vocab(self, stems: int, pos: int, affixes: int, affix_sets: int) -> "ModelConfig":
        return replace(self, vocab=VocabSizes(stems, pos, affixes, affix_sets))


def toy_config(variant: str = "ASC", **over) -> ModelConfig:
    """Small two-tier model: morphology hidden 16, sentence hidden 96, 2 layers each."""
    slots = FEATURE_SLOTS[variant]
    stem_dim = 96 - slots * 16
    return ModelConfig(
        morpho=MorphoConfig(2, 2, 16, 8, 32, 16),
        sentence=SentenceConfig(2, 4, 96, 24, 192, stem_dim),
        variant=variant,
        vocab=over.pop("vocab", VocabSizes(60, 14, 40, 30)),
        max_positions=over.pop("max_positions", 64),
        **over,
    )
