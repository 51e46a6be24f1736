"""Pretraining loop."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .. import kernel as K
from ..encoder import ModelConfig, MorphoBatch, collate, load_checkpoint, save_checkpoint
from ..kernel.optim import LAMB, AdamW, linear_warmup_decay
from ..kernel.random import derive_seed
from .masking import MaskingSpec, apply_masking
from .model import PretrainModel, build_model, pretrain_loss


class TrainingDiverged(RuntimeError):
    """The loss became non-finite; the offending batch was dumped."""


@dataclass
class TrainConfig:
    steps: int = 300
    batch_size: int = 16
    peak_lr: float = 1e-3
    warmup_steps: int = 20
    optimizer: str = "lamb"
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-6
    mask_rate: float = 0.15
    omit_rate: float = 0.7
    checkpoint_every: int = 0
    ensure_nonempty: bool = True

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "TrainConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown train config keys: {sorted(extra)}")
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        cfg = cls(**d)
        if cfg.optimizer not in ("lamb", "adamw"):
            raise ValueError(f"optimizer must be 'lamb' or 'adamw', got {cfg.optimizer!r}")
        return cfg


@dataclass
class StepLog:
    step: int
    total: float
    stem_loss: float
    affix_loss: float
    lr: float
    stem_acc: float = 0.0


@dataclass
class TrainResult:
    model: PretrainModel
    log: list[StepLog] = field(default_factory=list)
    checkpoint: Path | None = None


def make_optimizer(model, cfg: TrainConfig):
    cls = LAMB if cfg.optimizer == "lamb" else AdamW
    return cls(model.parameters(), lr=cfg.peak_lr, betas=cfg.betas, eps=cfg.eps,
               weight_decay=cfg.weight_decay)


def batch_order(n: int, batch_size: int, step: int, seed: int) -> list[int]:
    """Sentence indices for ``step``: consecutive slices of per-epoch shuffles."""
    per_epoch = max(1, math.ceil(n / batch_size))
    epoch, k = divmod(step, per_epoch)
    perm = np.random.default_rng(derive_seed(seed, "shuffle", epoch)).permutation(n)
    return perm[k * batch_size:(k + 1) * batch_size].tolist()


def collate_for(vocab, sentences, cfg: ModelConfig) -> MorphoBatch:
    return collate(sentences, vocab.stem_pad_id, vocab.pos_index["[PAD]"], vocab.affix_sets.empty_id,
                   cfg.max_affixes)


def _dump(path: Path, step: int, batch: MorphoBatch, plan, idx):
    doc = {"step": step, "sentences": idx, "plan_seed": plan.seed,
           "stem_ids": batch.stem_ids.tolist(), "pos_ids": batch.pos_ids.tolist(),
           "affix_set_ids": batch.affix_set_ids.tolist(), "affix_ids": batch.affix_ids.tolist(),
           "affix_mask": batch.affix_mask.tolist(), "selected": plan.selected.tolist(),
           "action": plan.action.tolist()}
    path.write_text(json.dumps(doc), encoding="utf-8")


def train_step(model: PretrainModel, opt, batch: MorphoBatch, spec: MaskingSpec, seed: int, step: int,
               lr: float, ensure_nonempty: bool = True):
    masked, plan = apply_masking(batch, derive_seed(seed, "mask", step), spec, ensure_nonempty)
    stem, affix = model.predict(masked, plan.positions(), derive_seed(seed, "forward", step), training=True)
    parts = pretrain_loss(stem, affix, plan, model.objective, model.cfg.vocab.affixes)
    return parts, plan


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    sentences: Sequence[Sequence],
    vocab,
    seed: int = 0,
    out_dir=None,
    log_path=None,
    on_step: Callable[[StepLog], None] | None = None,
    model: PretrainModel | None = None,
) -> TrainResult:
    sentences = [s for s in sentences if s]
    if not sentences:
        raise ValueError("training corpus has no sentences")
    model = model or build_model(model_cfg, seed)
    opt = make_optimizer(model, train_cfg)
    spec = MaskingSpec.from_vocab(vocab, mask_rate=train_cfg.mask_rate, omit_rate=train_cfg.omit_rate)
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    log_fh = open(log_path, "w", newline="", encoding="utf-8") if log_path else None
    writer = csv.writer(log_fh) if log_fh else None
    if writer:
        writer.writerow(["step", "total", "stem_loss", "affix_loss", "lr"])
    result = TrainResult(model)
    try:
        for step in range(train_cfg.steps):
            idx = batch_order(len(sentences), train_cfg.batch_size, step, seed)
            batch = collate_for(vocab, [sentences[i] for i in idx], model_cfg)
            lr = linear_warmup_decay(step, train_cfg.peak_lr, train_cfg.warmup_steps, train_cfg.steps)
            opt.zero_grad()
            parts, plan = train_step(model, opt, batch, spec, seed, step, lr, train_cfg.ensure_nonempty)
            total = parts.total.item()
            if not math.isfinite(total):
                dump = (out or Path(".")) / f"diverged_step{step}.json"
                _dump(dump, step, batch, plan, idx)
                raise TrainingDiverged(f"non-finite loss {total} at step {step}; batch written to {dump}")
            parts.total.backward()
            opt.step(lr)
            rec = StepLog(step, total, parts.stem_loss, parts.affix_loss, lr, parts.stem_acc)
            result.log.append(rec)
            if writer:
                writer.writerow([step, repr(total), repr(parts.stem_loss), repr(parts.affix_loss), repr(lr)])
            if on_step:
                on_step(rec)
            k = train_cfg.checkpoint_every
            if out and k and (step + 1) % k == 0 and step + 1 < train_cfg.steps:
                save_checkpoint(out / f"step{step + 1}.ckpt", model_cfg.to_dict(), model.state_dict())
    finally:
        if log_fh:
            log_fh.close()
    if out:
        result.checkpoint = out / "final.ckpt"
        save_checkpoint(result.checkpoint, model_cfg.to_dict(), model.state_dict())
    return result


def masked_stem_accuracy(model: PretrainModel, sentences, vocab, seed: int, rounds: int = 4,
                         batch_size: int = 16, mask_rate: float = 0.15) -> float:
    """Fraction of selected slots whose original stem is the argmax prediction,
    over ``rounds`` fixed maskings of the whole corpus."""
    spec = MaskingSpec.from_vocab(vocab, mask_rate=mask_rate)
    hit = tot = 0
    with K.no_grad():
        for r in range(rounds):
            for start in range(0, len(sentences), batch_size):
                batch = collate_for(vocab, sentences[start:start + batch_size], model.cfg)
                masked, plan = apply_masking(batch, derive_seed(seed, "eval", r, start), spec, True)
                stem, _ = model.predict(masked, plan.positions())
                tgt = batch.stem_ids.reshape(-1)[plan.positions()]
                hit += int((stem.data.argmax(1) == tgt).sum())
                tot += len(tgt)
    return hit / tot


def load_model(path) -> PretrainModel:
    cfg_dict, params = load_checkpoint(path)
    model = build_model(ModelConfig.from_dict(cfg_dict), 0)
    model.load_state_dict(params)
    return model
