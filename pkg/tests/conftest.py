"""Session-wide toy fixtures: grammar, the 50-sentence synthetic corpus, its
vocabulary, and one 300-step pretraining run shared by the slower tests."""

from pathlib import Path

import pytest

from morphlm.encoder import ModelConfig
from morphlm.morphology import load_toy_grammar
from morphlm.pipeline import synthetic_sentences
from morphlm.pretrain import TrainConfig, load_preset, train
from morphlm.vocab import build_vocab, tokenize_word

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def grammar():
    return load_toy_grammar()


@pytest.fixture(scope="session")
def synthetic(grammar):
    sents = synthetic_sentences(grammar, 50, 0)
    preset = load_preset("toy.json")
    vocab = build_vocab(grammar, [a for s in sents for a in s],
                        [" ".join(a.surface for a in s) for s in sents],
                        preset["vocab"]["affix_sets"], preset["vocab"]["bpe_size"])
    pieces = [[p for a in s for p in tokenize_word(a, vocab)] for s in sents]
    return sents, vocab, pieces


def toy_model_config(vocab, name="toy.json", **over) -> ModelConfig:
    d = dict(load_preset(name)["model"])
    d["vocab"] = {"stems": vocab.n_stems, "pos": vocab.n_pos, "affixes": vocab.n_affixes,
                  "affix_sets": vocab.n_affix_sets}
    d.update(over)
    return ModelConfig.from_dict(d)


@pytest.fixture(scope="session")
def pretrained(synthetic, tmp_path_factory):
    _, vocab, pieces = synthetic
    cfg = toy_model_config(vocab)
    out = tmp_path_factory.mktemp("pretrain")
    res = train(cfg, TrainConfig.from_dict(load_preset("toy.json")["train"]), pieces, vocab, seed=0,
                out_dir=out, log_path=out / "log.csv")
    return res, cfg, out


# -- acceptance reporting ---------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """``report(n, ok, detail)`` prints and records one verdict line per criterion."""
    def _report(n: int, ok: bool, detail: str):
        line = f"ACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
