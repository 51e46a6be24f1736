"""Two-tier morphology-aware transformer encoder."""

from .config import (
    FEATURE_SLOTS, VARIANTS, ConfigError, ModelConfig, MorphoConfig, SentenceConfig, VocabSizes,
    toy_config,
)
from .layers import relative_buckets
from .model import (
    EncodedSentence, LengthError, MorphoBatch, MorphologyEncoder, PositionalBias, TwoTierEncoder,
    assemble_word_vector, build_encoder, canonical_affix_order, collate, count_encoder_parameters,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .bias_export import export_positional_bias, positional_bias_matrices

__all__ = [
    "FEATURE_SLOTS", "VARIANTS", "ConfigError", "ModelConfig", "MorphoConfig", "SentenceConfig",
    "VocabSizes", "toy_config", "relative_buckets", "EncodedSentence", "LengthError",
    "MorphoBatch", "MorphologyEncoder", "PositionalBias", "TwoTierEncoder",
    "assemble_word_vector", "build_encoder", "canonical_affix_order", "collate",
    "count_encoder_parameters", "CheckpointError", "load_checkpoint", "save_checkpoint",
    "export_positional_bias", "positional_bias_matrices",
]
