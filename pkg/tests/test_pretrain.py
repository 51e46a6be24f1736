import json
import math

import numpy as np
import pytest

import morphlm.kernel as K
from morphlm.encoder import ConfigError, ModelConfig, collate, toy_config
from morphlm.encoder.config import VocabSizes
from morphlm.kernel.gradcheck import check_parameters, relative_error
from morphlm.pretrain import (
    KEEP, MASK, NONE, RANDOM, MaskingSpec, TrainConfig, TrainingDiverged, adr_target, apply_masking,
    build_model, count_parameters, init_loss_estimate, load_model, load_preset, masked_stem_accuracy,
    pretrain_loss, train,
)
from morphlm.pretrain.masking import MaskingPlan
from morphlm.pretrain.presets import preset_path
from morphlm.vocab import WordPiece

from conftest import toy_model_config

VOCAB = VocabSizes(60, 14, 40, 30)
SPEC = MaskingSpec(stem_mask_id=2, pos_mask_id=1, affix_set_mask_id=29, n_stems=60)


def batch_of(rng, b, t, a=4):
    sents = []
    for _ in range(b):
        words = []
        for _ in range(t):
            k = int(rng.integers(0, a + 1))
            words.append(WordPiece(int(rng.integers(4, 60)), tuple(int(x) for x in rng.choice(40, k, replace=False)),
                                   int(rng.integers(0, 29)), int(rng.integers(2, 14)), False))
        sents.append(words)
    return collate(sents, 0, 0, 28)


# -- masking -------------------------------------------------------------------

def test_masking_rates_on_200k_tokens():
    batch = batch_of(np.random.default_rng(0), 400, 500, a=2)
    _, plan = apply_masking(batch, 1, SPEC)
    n = batch.word_mask.sum()
    sel = plan.selected.sum()
    assert abs(sel / n - 0.15) < 0.005
    acts = plan.action[plan.selected]
    for code, p in ((MASK, 0.8), (RANDOM, 0.1), (KEEP, 0.1)):
        assert abs((acts == code).mean() - p) < 0.01
    corrupt = (plan.action == MASK) | (plan.action == RANDOM)
    assert abs(plan.affixes_omitted[corrupt].mean() - 0.7) < 0.01


def test_masking_contract_per_action():
    batch = batch_of(np.random.default_rng(1), 50, 40)
    out, plan = apply_masking(batch, 3, SPEC)
    a = plan.action
    assert np.array_equal(a == NONE, ~plan.selected)
    keep = (a == KEEP) | (a == NONE)
    for name in ("stem_ids", "pos_ids", "affix_set_ids"):
        assert np.array_equal(getattr(out, name)[keep], getattr(batch, name)[keep])
    assert np.array_equal(out.affix_mask[keep], batch.affix_mask[keep])
    assert (out.stem_ids[a == MASK] == 2).all()
    r = out.stem_ids[a == RANDOM]
    assert ((r >= 4) & (r < 60)).all()
    corrupt = (a == MASK) | (a == RANDOM)
    assert (out.pos_ids[corrupt] == 1).all() and (out.affix_set_ids[corrupt] == 29).all()
    om = plan.affixes_omitted
    assert not om[~corrupt].any()
    assert not out.affix_mask[om].any()
    kept = corrupt & ~om
    assert np.array_equal(out.affix_mask[kept], batch.affix_mask[kept])
    # the original ids survive unmodified for the loss
    assert np.array_equal(plan.original.stem_ids, batch.stem_ids)


def test_masking_is_seeded():
    batch = batch_of(np.random.default_rng(2), 20, 30)
    _, p1 = apply_masking(batch, 7, SPEC)
    _, p2 = apply_masking(batch, 7, SPEC)
    _, p3 = apply_masking(batch, 8, SPEC)
    assert np.array_equal(p1.action, p2.action) and np.array_equal(p1.affixes_omitted, p2.affixes_omitted)
    assert not np.array_equal(p1.action, p3.action)


def test_padding_never_selected_and_nonempty_guarantee():
    rng = np.random.default_rng(3)
    b = batch_of(rng, 1, 2)
    b.word_mask[0, 1] = False
    spec = MaskingSpec(2, 1, 29, 60, mask_rate=1e-9)
    _, plan = apply_masking(b, 0, spec)
    assert not plan.selected.any()
    _, plan = apply_masking(b, 0, spec, ensure_nonempty=True)
    assert plan.selected.tolist() == [[True, False]]


def test_masking_spec_validation():
    with pytest.raises(ValueError):
        MaskingSpec(2, 1, 29, 60, mask_rate=0.0)
    with pytest.raises(ValueError):
        MaskingSpec(2, 1, 29, 60, action_probs=(0.8, 0.1, 0.2))
    with pytest.raises(ValueError):
        MaskingSpec(2, 1, 29, 4)


def test_adr_target():
    assert adr_target([], 5) is None
    np.testing.assert_array_equal(adr_target([0, 1, 2, 3], 6), [0.25] * 4 + [0, 0])
    np.testing.assert_array_equal(adr_target([4], 5), [0, 0, 0, 0, 1])
    with pytest.raises(ValueError):
        adr_target([1, 1], 5)
    with pytest.raises(ValueError):
        adr_target([5], 5)


# -- loss ------------------------------------------------------------------------

def _plan(batch, selected):
    sel = np.asarray(selected, dtype=bool)
    return MaskingPlan(sel, np.where(sel, MASK, NONE).astype(np.int8), np.zeros_like(sel), 0, batch)


def test_forced_logits_give_zero_loss():
    batch = batch_of(np.random.default_rng(4), 2, 3)
    plan = _plan(batch, [[1, 0, 1], [1, 1, 0]])
    pos = plan.positions()
    st = batch.stem_ids.reshape(-1)[pos]
    sl = np.full((len(pos), 60), -50.0)
    sl[np.arange(len(pos)), st] = 50.0
    asc = np.full((len(pos), 30), -50.0)
    asc[np.arange(len(pos)), batch.affix_set_ids.reshape(-1)[pos]] = 50.0
    parts = pretrain_loss(K.Tensor(sl), K.Tensor(asc), plan, "ASC")
    assert parts.total.item() < 1e-6 and parts.stem_acc == 1.0
    rows = batch.affix_ids.reshape(6, -1)[pos]
    masks = batch.affix_mask.reshape(6, -1)[pos]
    adr = np.where(np.stack([adr_target(r[m], 40) if m.any() else np.zeros(40) for r, m in zip(rows, masks)]) > 0,
                   50.0, -50.0)
    parts = pretrain_loss(K.Tensor(sl), K.Tensor(adr), plan, "ADR")
    assert 0.0 <= parts.affix_loss < 1e-6 and parts.total.item() < 1e-6


def test_uniform_stem_logits_give_log_vocab():
    batch = batch_of(np.random.default_rng(5), 1, 4)
    plan = _plan(batch, [[1, 1, 0, 1]])
    parts = pretrain_loss(K.Tensor(np.zeros((3, 50))), None, plan, None)
    assert abs(parts.total.item() - math.log(50)) < 1e-12


def test_adr_two_slot_hand_sum():
    ids = np.zeros((1, 2, 2), dtype=int)
    ids[0, 0] = [0, 2]
    ids[0, 1, 0] = 1
    mask = np.array([[[True, True], [True, False]]])
    from morphlm.encoder import MorphoBatch
    batch = MorphoBatch(np.array([[5, 6]]), np.array([[2, 3]]), np.array([[0, 0]]), ids, mask,
                        np.ones((1, 2), dtype=bool))
    plan = _plan(batch, [[1, 1]])
    logits = np.array([[1.0, 0.0, 2.0, -1.0], [0.5, 1.5, 0.0, 0.0]])
    parts = pretrain_loss(K.Tensor(np.zeros((2, 10))), K.Tensor(logits), plan, "ADR", 4)
    lp = logits - np.log(np.exp(logits).sum(1, keepdims=True))
    row0 = 0.5 * (math.log(0.5) - lp[0, 0]) + 0.5 * (math.log(0.5) - lp[0, 2])
    row1 = 0.0 - lp[1, 1]
    assert abs(parts.affix_loss - (row0 + row1) / 2) < 1e-12
    assert abs(parts.total.item() - (math.log(10) + (row0 + row1) / 2)) < 1e-12


def test_adr_without_affixed_slots_is_zero():
    batch = batch_of(np.random.default_rng(6), 1, 2, a=0)
    parts = pretrain_loss(K.Tensor(np.zeros((2, 60))), K.Tensor(np.zeros((2, 40))),
                          _plan(batch, [[1, 1]]), "ADR")
    assert parts.affix_loss == 0.0


def test_objective_head_mismatch_rejected():
    batch = batch_of(np.random.default_rng(7), 1, 2)
    with pytest.raises(ConfigError):
        pretrain_loss(K.Tensor(np.zeros((2, 60))), None, _plan(batch, [[1, 1]]), "ASC")
    with pytest.raises(ValueError):
        pretrain_loss(K.Tensor(np.zeros((1, 60))), None, _plan(batch, [[0, 0]]), None)


# -- model -----------------------------------------------------------------------

@pytest.mark.parametrize("variant", ["ASC", "ADR", "AVG", "STEM_ONLY"])
def test_heads_are_tied_and_counted_once(variant):
    cfg = toy_config(variant)
    m = build_model(cfg)
    assert m.stem_head._table[0] is m.encoder.stem.table
    ids = {id(p) for p in m.parameters()}
    assert len(ids) == len(m.parameters())
    assert count_parameters(cfg) == m.num_parameters()


def test_full_size_parameter_counts():
    asc = ModelConfig.from_dict(load_preset("paper-asc.json")["model"])
    adr = ModelConfig.from_dict(load_preset("paper-adr.json")["model"])
    assert abs(count_parameters(asc) / 105e6 - 1) <= 0.10
    assert abs(count_parameters(adr) / 101e6 - 1) <= 0.10


@pytest.mark.parametrize("variant", ["AVG", "STEM_ONLY"])
def test_gradients_match_finite_differences(variant):
    cfg = toy_config(variant, dropout=0.1, init_std=0.2)
    m = build_model(cfg, 1)
    batch = batch_of(np.random.default_rng(8), 2, 4)
    masked, plan = apply_masking(batch, 4, MaskingSpec(2, 1, 29, 60, mask_rate=0.5), True)

    def loss():
        s, a = m.predict(masked, plan.positions(), seed=11, training=True)
        return pretrain_loss(s, a, plan, m.objective, 40).total

    res = check_parameters(loss, list(m.named_parameters()), np.random.default_rng(0))
    worst = max(res, key=lambda r: relative_error(r.analytic, r.numeric, 1e-6))
    assert relative_error(worst.analytic, worst.numeric, 1e-6) <= 1e-4, worst


def test_init_loss_estimate_close_to_observed(synthetic):
    _, vocab, pieces = synthetic
    for name in ("toy.json", "toy-adr.json"):
        cfg = toy_model_config(vocab, name, init_std=0.02)
        m = build_model(cfg, 0)
        batch = collate(pieces[:50], vocab.stem_pad_id, 0, vocab.affix_sets.empty_id)
        masked, plan = apply_masking(batch, 0, MaskingSpec.from_vocab(vocab), True)
        with K.no_grad():
            s, a = m.predict(masked, plan.positions())
            got = pretrain_loss(s, a, plan, m.objective, vocab.n_affixes).total.item()
        aff = batch.affix_mask.reshape(-1, batch.affix_mask.shape[-1])[plan.positions()].sum(1)
        est = init_loss_estimate(cfg, aff[aff > 0])
        assert abs(got - est) / est < 0.02, (name, got, est)


# -- training --------------------------------------------------------------------

def _short(vocab, pieces, seed, steps=12, **kw):
    cfg = toy_model_config(vocab)
    tc = TrainConfig.from_dict({**load_preset("toy.json")["train"], "steps": steps, "batch_size": 8, **kw})
    return train(cfg, tc, pieces, vocab, seed=seed)


def test_training_is_deterministic(synthetic):
    _, vocab, pieces = synthetic
    a = [r.total for r in _short(vocab, pieces, 3).log]
    b = [r.total for r in _short(vocab, pieces, 3).log]
    c = [r.total for r in _short(vocab, pieces, 4).log]
    assert a == b and a != c


def test_loss_moving_average_decreases(pretrained):
    res, _, _ = pretrained
    tot = np.array([r.total for r in res.log])
    ma = np.convolve(tot, np.ones(20) / 20, mode="valid")
    assert ma[-1] < 0.5 * ma[0]
    assert all(ma[i + 50] < ma[i] for i in range(0, len(ma) - 50, 50))


def test_log_csv_and_checkpoint(pretrained, synthetic):
    res, cfg, out = pretrained
    _, vocab, pieces = synthetic
    rows = (out / "log.csv").read_text().strip().split("\n")
    assert rows[0] == "step,total,stem_loss,affix_loss,lr" and len(rows) == 301
    back = load_model(out / "final.ckpt")
    assert back.cfg == cfg
    assert masked_stem_accuracy(back, pieces, vocab, 5) == masked_stem_accuracy(res.model, pieces, vocab, 5)


def test_intermediate_checkpoints(synthetic, tmp_path):
    _, vocab, pieces = synthetic
    cfg = toy_model_config(vocab)
    tc = TrainConfig(steps=6, batch_size=4, checkpoint_every=2)
    train(cfg, tc, pieces, vocab, 0, tmp_path)
    assert sorted(p.name for p in tmp_path.glob("*.ckpt")) == ["final.ckpt", "step2.ckpt", "step4.ckpt"]


def test_divergence_dumps_batch(synthetic, tmp_path):
    _, vocab, pieces = synthetic
    cfg = toy_model_config(vocab)
    m = build_model(cfg)
    m.encoder.cls.data[:] = np.nan
    with pytest.raises(TrainingDiverged):
        train(cfg, TrainConfig(steps=3, batch_size=4), pieces, vocab, 0, tmp_path, model=m)
    doc = json.loads((tmp_path / "diverged_step0.json").read_text())
    assert doc["step"] == 0 and len(doc["sentences"]) == 4


def test_empty_corpus_rejected(synthetic):
    _, vocab, _ = synthetic
    with pytest.raises(ValueError):
        train(toy_model_config(vocab), TrainConfig(steps=1), [[]], vocab)


def test_train_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"stepz": 3})


def test_presets_resolve(tmp_path, monkeypatch):
    assert preset_path("toy").name == "toy.json"
    with pytest.raises(FileNotFoundError):
        preset_path("nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": \n  oops}')
    with pytest.raises(ValueError, match=r"bad.json:2:"):
        load_preset(bad)
