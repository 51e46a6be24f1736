"""Masked-morphology pretraining."""

from .masking import (
    ACTION_NAMES, KEEP, MASK, NONE, RANDOM, MaskingPlan, MaskingSpec, adr_target, apply_masking,
)
from .model import (
    AFFIX_OBJECTIVE, LossParts, PretrainModel, TiedHead, build_model, count_parameters,
    init_loss_estimate, pretrain_loss,
)
from .train import (
    StepLog, TrainConfig, TrainingDiverged, TrainResult, batch_order, collate_for, load_model,
    masked_stem_accuracy, train,
)
from .presets import load_preset, preset_path

__all__ = [
    "ACTION_NAMES", "KEEP", "MASK", "NONE", "RANDOM", "MaskingPlan", "MaskingSpec", "adr_target",
    "apply_masking", "AFFIX_OBJECTIVE", "LossParts", "PretrainModel", "TiedHead", "build_model",
    "count_parameters", "init_loss_estimate", "pretrain_loss", "StepLog", "TrainConfig",
    "TrainingDiverged", "TrainResult", "batch_order", "collate_for", "load_model",
    "masked_stem_accuracy", "train", "load_preset", "preset_path",
]
