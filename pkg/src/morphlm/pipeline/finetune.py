"""Downstream fine-tuning: a two-layer head on the pretrained encoder.

Classification and regression read the CLS row; sequence labeling reads every
word row.  Task files:

* sentence_classification / regression: ``text<TAB>label``
* sentence_pair (and pair regression): ``text_a<TAB>text_b<TAB>label``,
  joined with a [SEP] piece
* sequence_labeling: the parsed-corpus format with a sixth ``label`` column
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .. import kernel as K
from ..encoder import LengthError, TwoTierEncoder
from ..kernel.nn import Init, Linear, Module
from ..kernel.optim import AdamW, linear_warmup_decay
from ..kernel.random import derive_seed, rng
from ..pretrain import collate_for, load_model
from ..vocab import PAD, SEP, Vocab, WordPiece
from . import metrics
from .corpus import DataError, iter_parsed, split_sentences

KINDS = ("sentence_classification", "sentence_pair", "regression", "sequence_labeling")
METRICS = {
    "sentence_classification": ("accuracy",),
    "sentence_pair": ("accuracy",),
    "regression": ("pearson", "spearman"),
    "sequence_labeling": ("f1_micro", "accuracy"),
}


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    labels: tuple[str, ...] | None = None  # None: inferred from the training file
    metric: str | None = None               # headline metric; defaults per kind

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}; expected one of {KINDS}")
        if self.metric is not None and self.metric not in METRICS[self.kind]:
            raise ValueError(f"metric {self.metric!r} does not fit task kind {self.kind!r}")
        if self.is_regression and self.labels is not None:
            raise ValueError("regression tasks have no label inventory")

    @property
    def headline(self) -> str:
        return self.metric or METRICS[self.kind][0]

    @property
    def is_regression(self) -> bool:
        return self.kind == "regression"

    @property
    def is_labeling(self) -> bool:
        return self.kind == "sequence_labeling"


@dataclass
class FinetuneConfig:
    epochs: int = 15
    batch_size: int = 16
    peak_lr: float = 1e-3
    weight_decay: float = 0.1
    warmup_fraction: float = 0.06
    betas: tuple[float, float] = (0.9, 0.98)
    eps: float = 1e-6

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "FinetuneConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown finetune settings: {sorted(unknown)}")
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d)


@dataclass
class Example:
    pieces: list[WordPiece]
    label: object             # class name, float, or list of per-piece labels
    line: int = 0


class FinetuneModel(Module):
    def __init__(self, init, encoder: TwoTierEncoder, n_out: int, per_word: bool):
        h = encoder.cfg.sentence.hidden
        self.encoder = encoder
        self.dense = Linear(init, h, h)
        self.out = Linear(init, h, n_out)
        self.per_word = per_word

    def __call__(self, batch, seed=None, training=False):
        """[B, n_out] from CLS, or [B * T, n_out] over all word slots."""
        enc = self.encoder(batch, seed, training)
        b, t = batch.shape
        if self.per_word:
            rows = K.index_select(enc.hidden, 1, list(range(1, t + 1)))
            rows = K.reshape(rows, (b * t, rows.shape[-1]))
        else:
            rows = K.reshape(K.index_select(enc.hidden, 1, [0]), (b, enc.hidden.shape[-1]))
        return self.out(K.gelu(self.dense(rows)))


@dataclass
class FinetuneResult:
    model: FinetuneModel
    labels: tuple[str, ...] | None
    history: list[dict] = field(default_factory=list)

    @property
    def final(self) -> dict:
        return self.history[-1] if self.history else {}


# -- data -------------------------------------------------------------------


class TextEncoder:
    """Raw text -> WordPieces through the analyzer, tagger and vocabulary."""

    def __init__(self, settings, vocab: Vocab, tables=None):
        from .preprocess import tag_corpus, token_lines
        self._tag, self._lines = tag_corpus, token_lines
        self.settings, self.vocab, self.tables = settings, vocab, tables

    def __call__(self, text: str) -> list[WordPiece]:
        words = [w for s in split_sentences(text) for w in s]
        if not words:
            return []
        tagged, _ = self._tag(self.settings, [words], 1, self.tables)
        return [self.vocab.piece(t.stem, t.pos_tag, t.affixes, t.surface)
                for t in self._lines(tagged[0], self.vocab)]


def _sep(vocab: Vocab) -> WordPiece:
    return WordPiece(vocab.stem_id(SEP), (), vocab.affix_sets.empty_id, vocab.pos_index[PAD], False, SEP)


def read_task_file(path, task: TaskSpec, vocab: Vocab, encode: Callable[[str], list[WordPiece]]):
    path = Path(path)
    if task.is_labeling:
        out = []
        for _, sent in iter_parsed(path, labeled=True):
            pieces = []
            for lineno, t in sent:
                try:
                    pieces.append(vocab.piece(t.stem, t.pos_tag, t.affixes, t.surface))
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
            out.append(Example(pieces, [t.label for _, t in sent], sent[0][0]))
        return out
    out = []
    want = {"sentence_pair": (3,), "regression": (2, 3)}.get(task.kind, (2,))
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) not in want:
            raise DataError(f"{path}:{lineno}: expected {' or '.join(map(str, want))} "
                            f"tab-separated fields, got {len(parts)}")
        label = parts[-1].strip()
        if task.is_regression:
            try:
                label = float(label)
            except ValueError:
                raise DataError(f"{path}:{lineno}: regression target {label!r} is not a number") from None
        pieces = encode(parts[0])
        if len(parts) == 3:
            pieces = pieces + [_sep(vocab)] + encode(parts[1])
        if not pieces:
            raise DataError(f"{path}:{lineno}: empty text")
        out.append(Example(pieces, label, lineno))
    return out


def label_inventory(task: TaskSpec, train: Sequence[Example]) -> tuple[str, ...] | None:
    if task.is_regression:
        return None
    if task.labels is not None:
        return tuple(task.labels)
    seen = set()
    for ex in train:
        seen.update(ex.label if task.is_labeling else [ex.label])
    return tuple(sorted(seen))


def check_labels(examples: Sequence[Example], labels, where: str, task: TaskSpec):
    if labels is None:
        return
    known = set(labels)
    for ex in examples:
        items = ex.label if task.is_labeling else [ex.label]
        for k, lab in enumerate(items):
            if lab not in known:
                line = ex.line + k if task.is_labeling else ex.line
                raise DataError(f"{where}:{line}: label {lab!r} not in inventory {list(labels)}")


# -- training ---------------------------------------------------------------


def _targets(task, labels, exs, batch):
    if task.is_regression:
        return np.array([float(e.label) for e in exs])
    idx = {l: i for i, l in enumerate(labels)}
    if not task.is_labeling:
        return np.array([idx[e.label] for e in exs])
    b, t = batch.shape
    flat = np.full(b * t, -1)
    for i, e in enumerate(exs):
        flat[i * t:i * t + len(e.label)] = [idx[l] for l in e.label]
    return flat


def _loss(task, out, target):
    if task.is_regression:
        d = K.sub(K.reshape(out, (out.shape[0],)), K.Tensor(target))
        return K.mean(K.mul(d, d))
    if task.is_labeling:
        keep = np.flatnonzero(target >= 0)
        return K.cross_entropy(K.index_select(out, 0, keep), target[keep])
    return K.cross_entropy(out, target)


def predict(model: FinetuneModel, task: TaskSpec, labels, examples, vocab, batch_size: int = 32):
    preds = []
    with K.no_grad():
        for s in range(0, len(examples), batch_size):
            exs = examples[s:s + batch_size]
            batch = collate_for(vocab, [e.pieces for e in exs], model.encoder.cfg)
            out = model(batch).data
            if task.is_regression:
                preds.extend(out[:, 0].tolist())
            elif task.is_labeling:
                t = batch.shape[1]
                arg = out.argmax(1)
                for i, e in enumerate(exs):
                    preds.append([labels[j] for j in arg[i * t:i * t + len(e.pieces)]])
            else:
                preds.extend(labels[j] for j in out.argmax(1))
    return preds


def evaluate(task: TaskSpec, gold, pred) -> dict:
    if task.is_regression:
        res = {}
        for name, fn in (("pearson", metrics.pearson), ("spearman", metrics.spearman)):
            try:
                res[name] = fn(gold, pred)
            except metrics.UndefinedMetricError:
                res[name] = float("nan")
        return res
    if task.is_labeling:
        flat_g = [x for s in gold for x in s]
        flat_p = [x for s in pred for x in s]
        try:
            f1 = metrics.f1_micro(gold, pred)
        except metrics.UndefinedMetricError:
            f1 = float("nan")
        return {"f1_micro": f1, "accuracy": metrics.accuracy(flat_g, flat_p)}
    return {"accuracy": metrics.accuracy(gold, pred)}


def finetune(checkpoint, task: TaskSpec, train_examples: Sequence[Example], dev_examples: Sequence[Example],
             vocab: Vocab, cfg: FinetuneConfig | None = None, seed: int = 0,
             on_epoch: Callable[[dict], None] | None = None) -> FinetuneResult:
    cfg = cfg or FinetuneConfig()
    if not train_examples:
        raise DataError("training file has no examples")
    encoder = load_model(checkpoint).encoder
    if max(len(e.pieces) for e in list(train_examples) + list(dev_examples)) > encoder.cfg.max_positions:
        raise LengthError(f"example longer than max_positions={encoder.cfg.max_positions}")
    labels = label_inventory(task, train_examples)
    check_labels(train_examples, labels, "train", task)
    check_labels(dev_examples, labels, "dev", task)
    n_out = 1 if labels is None else len(labels)
    init = Init(np.random.default_rng(derive_seed(seed, "finetune-head")), encoder.cfg.init_std)
    model = FinetuneModel(init, encoder, n_out, task.is_labeling)
    opt = AdamW(model.parameters(), cfg.peak_lr, cfg.betas, cfg.eps, cfg.weight_decay)
    steps_per_epoch = math.ceil(len(train_examples) / cfg.batch_size)
    total = cfg.epochs * steps_per_epoch
    warmup = int(round(cfg.warmup_fraction * total))
    result = FinetuneResult(model, labels)
    step = 0
    for epoch in range(cfg.epochs):
        order = rng(seed, "finetune-order", epoch).permutation(len(train_examples))
        losses = []
        for s in range(0, len(order), cfg.batch_size):
            exs = [train_examples[i] for i in order[s:s + cfg.batch_size]]
            batch = collate_for(vocab, [e.pieces for e in exs], encoder.cfg)
            lr = linear_warmup_decay(step, cfg.peak_lr, warmup, total)
            opt.zero_grad()
            out = model(batch, derive_seed(seed, "finetune-forward", step), training=True)
            loss = _loss(task, out, _targets(task, labels, exs, batch))
            loss.backward()
            opt.step(lr)
            losses.append(loss.item())
            step += 1
        rec = {"epoch": epoch + 1, "train_loss": float(np.mean(losses))}
        if dev_examples:
            pred = predict(model, task, labels, dev_examples, vocab)
            rec.update(evaluate(task, [e.label for e in dev_examples], pred))
        result.history.append(rec)
        if on_epoch:
            on_epoch(rec)
    return result
