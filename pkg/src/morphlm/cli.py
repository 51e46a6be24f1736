"""Command-line entry point: ``morphlm <subcommand> ...``.

Results go to stdout (or ``--out``), diagnostics to stderr.  Exit codes: 0
success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .encoder import ConfigError, ModelConfig, PositionalBias, export_positional_bias
from .kernel.nn import Init
from .kernel.random import derive_seed
from .morphology import analyze, bundled_grammar_path, load_counts, load_grammar, normalize
from .pipeline import (
    KINDS, DataError, FinetuneConfig, TaggerSettings, TaskSpec, TextEncoder, analyses_from_lines,
    as_token_lines, finetune, pieces_from_lines, preprocess, read_parsed, read_raw, read_task_file,
    split_sentences, synthetic_sentences, tag_corpus, write_parsed,
)
from .pretrain import TrainConfig, count_parameters, load_model, load_preset, train
from .tagger import TransitionTables
from .vocab import Vocab, build_vocab

TOY_GRAMMAR_NAMES = {"toy", "toy.json", "toy_grammar.json"}
DEFAULT_CONFIG = "toy.json"
TABLES_FILE = "transitions.json"


class UsageError(ValueError):
    pass


# -- shared helpers ---------------------------------------------------------


def grammar_path(name: str | None) -> Path:
    if name is None:
        return bundled_grammar_path()
    p = Path(name)
    if p.exists():
        return p
    if p.name in TOY_GRAMMAR_NAMES:
        return bundled_grammar_path()
    raise FileNotFoundError(f"grammar file not found: {name}")


def counts_path(args) -> str | None:
    if args.counts:
        return args.counts
    if grammar_path(args.grammar) == bundled_grammar_path():
        return str(bundled_grammar_path().with_name("toy_counts.tsv"))
    return None


def preset(args) -> dict:
    return load_preset(args.config or DEFAULT_CONFIG)


def settings(args) -> TaggerSettings:
    return TaggerSettings(str(grammar_path(args.grammar)), counts_path(args), preset(args).get("tagger"))


def model_config(section: dict, vocab: Vocab | None) -> ModelConfig:
    d = dict(section)
    if vocab is not None:
        d["vocab"] = {"stems": vocab.n_stems, "pos": vocab.n_pos, "affixes": vocab.n_affixes,
                      "affix_sets": vocab.n_affix_sets}
    return ModelConfig.from_dict(d)


def emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def load_tables(vocab_dir) -> TransitionTables | None:
    p = Path(vocab_dir) / TABLES_FILE
    return TransitionTables.load(p) if p.exists() else None


# -- subcommands ------------------------------------------------------------


def cmd_analyze(args):
    g = load_grammar(grammar_path(args.grammar))
    cp = counts_path(args)
    counts = load_counts(cp) if cp else {}
    words = list(args.word or []) + list(args.words)
    if not words:
        raise UsageError("analyze needs at least one word (--word or positional)")
    lines = []
    for w in words:
        for a in analyze(g, w, counts):
            lines.append("\t".join([normalize(w), a.stem, a.pos_tag, ",".join(a.affixes),
                                    f"{a.morph_score:.6f}"]))
    emit("".join(l + "\n" for l in lines), args.out)


def cmd_tag(args):
    s = settings(args)
    if args.text is not None:
        docs = [split_sentences(args.text)]
    else:
        docs = read_raw(args.input)
    flat = [x for d in docs for x in d]
    tables = TransitionTables.load(args.tables) if args.tables else None
    tagged, _ = tag_corpus(s, flat, args.workers, tables)
    out = []
    for sent in tagged:
        for surface, a, score in sent:
            out.append("\t".join([surface, a.stem, a.pos_tag, ",".join(a.affixes), f"{score:.6f}"]) + "\n")
        out.append("\n")
    emit("".join(out), args.out)


def cmd_build_vocab(args):
    cfg = preset(args).get("vocab", {})
    n_sets = args.affix_sets or cfg.get("affix_sets", 64)
    bpe_size = args.bpe_size or cfg.get("bpe_size", 128)
    g = load_grammar(grammar_path(args.grammar))
    tables = None
    if args.parsed:
        sents = read_parsed(args.input)
        analyses = analyses_from_lines(sents)
        surfaces = [" ".join(t.surface.lower() for t in s) for s in sents]
    else:
        flat = [x for d in read_raw(args.input) for x in d]
        tagged, tables = tag_corpus(settings(args), flat, args.workers)
        analyses = [a for s in tagged for _, a, _ in s]
        surfaces = [" ".join(a.surface for _, a, _ in s) for s in tagged]
    vocab = build_vocab(g, analyses, surfaces, n_sets, bpe_size)
    vocab.save(args.out)
    if tables is not None:
        tables.save(Path(args.out) / TABLES_FILE)
    print(json.dumps({"out": str(args.out), "stems": vocab.n_stems, "pos": vocab.n_pos,
                      "affixes": vocab.n_affixes, "affix_sets": vocab.n_affix_sets,
                      "bpe": vocab.bpe.size}))


def cmd_preprocess(args):
    vocab = Vocab.load(args.vocab)
    text = preprocess(args.input, settings(args), vocab, args.workers)
    emit(text, args.out)


def cmd_synthetic(args):
    g = load_grammar(grammar_path(args.grammar))
    sents = synthetic_sentences(g, args.sentences, args.seed)
    write_parsed(args.out, [as_token_lines(sents)])
    print(json.dumps({"out": str(args.out), "sentences": len(sents), "tokens": sum(map(len, sents))}))


def cmd_pretrain(args):
    p = preset(args)
    vocab = Vocab.load(args.vocab)
    cfg = model_config(p["model"], vocab)
    tc = dict(p.get("train", {}))
    if args.steps is not None:
        tc["steps"] = args.steps
    tcfg = TrainConfig.from_dict(tc)
    sents = [pieces_from_lines(s, vocab) for s in read_parsed(args.input)]
    out = Path(args.out)
    log = Path(args.log) if args.log else out / "log.csv"
    res = train(cfg, tcfg, sents, vocab, args.seed, out, log)
    final = res.log[-1]
    print(json.dumps({"checkpoint": str(res.checkpoint), "log": str(log), "steps": len(res.log),
                      "final_loss": final.total}))


def cmd_finetune(args):
    p = preset(args)
    vocab = Vocab.load(args.vocab)
    labels = tuple(args.labels.split(",")) if args.labels else None
    task = TaskSpec(args.task, labels, args.metric)
    encode = TextEncoder(settings(args), vocab, load_tables(args.vocab))
    train_ex = read_task_file(args.train, task, vocab, encode)
    dev_ex = read_task_file(args.dev, task, vocab, encode)
    fc = dict(p.get("finetune", {}))
    if args.epochs is not None:
        fc["epochs"] = args.epochs
    res = finetune(args.checkpoint, task, train_ex, dev_ex, vocab, FinetuneConfig.from_dict(fc), args.seed,
                   on_epoch=lambda rec: print(json.dumps(rec), flush=True))
    if args.out:
        Path(args.out).write_text(json.dumps({"task": task.kind, "metric": task.headline,
                                              "history": res.history}, indent=2) + "\n", encoding="utf-8")


def cmd_export_bias(args):
    if args.checkpoint:
        module = load_model(args.checkpoint).encoder
    else:
        cfg = model_config(preset(args)["model"], None)
        rng = np.random.default_rng(derive_seed(args.seed, "init"))
        module = PositionalBias(Init(rng, cfg.init_std), cfg)
    paths = export_positional_bias(module, args.length, args.out)
    print(json.dumps({"out": str(args.out), "heads": len(paths), "length": args.length}))


def cmd_param_count(args):
    p = preset(args)
    vocab = Vocab.load(args.vocab) if args.vocab else None
    cfg = model_config(p["model"], vocab)
    cfg.validate()
    print(json.dumps({"config": args.config or DEFAULT_CONFIG, "variant": cfg.variant,
                      "parameters": count_parameters(cfg)}))


# -- argument parsing -------------------------------------------------------


def _globals(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    p.add_argument("--config", default=d(None), help=f"JSON preset name or path (default {DEFAULT_CONFIG})")
    p.add_argument("--workers", type=int, default=d(1), help="preprocessing processes (default 1)")
    p.add_argument("--grammar", default=d(None), help="grammar JSON (default: bundled toy grammar)")
    p.add_argument("--counts", default=d(None), help="morpheme counts TSV")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="morphlm", description=__doc__.splitlines()[0])
    _globals(top, False)
    sub = top.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        _globals(p, True)
        p.set_defaults(fn=fn)
        return p

    p = add("analyze", cmd_analyze, "list every analysis of the given words")
    p.add_argument("words", nargs="*")
    p.add_argument("--word", action="append")
    p.add_argument("--out")

    p = add("tag", cmd_tag, "analyze and POS-tag raw text")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("input", nargs="?")
    src.add_argument("--text")
    p.add_argument("--tables", help="transition tables JSON (default: estimated on the input)")
    p.add_argument("--out")

    p = add("build-vocab", cmd_build_vocab, "build stem/affix/affix-set/BPE vocabularies")
    p.add_argument("input")
    p.add_argument("--parsed", action="store_true", help="input is a parsed corpus, not raw text")
    p.add_argument("--affix-sets", type=int)
    p.add_argument("--bpe-size", type=int)
    p.add_argument("--out", required=True, help="output directory")

    p = add("preprocess", cmd_preprocess, "raw text -> parsed corpus")
    p.add_argument("input")
    p.add_argument("--vocab", required=True)
    p.add_argument("--out")

    p = add("synthetic", cmd_synthetic, "write the seeded synthetic pretraining corpus")
    p.add_argument("--sentences", type=int, default=50)
    p.add_argument("--out", required=True)

    p = add("pretrain", cmd_pretrain, "masked-morphology pretraining")
    p.add_argument("input", help="parsed corpus")
    p.add_argument("--vocab", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--log", help="loss CSV path (default OUT/log.csv)")
    p.add_argument("--out", required=True, help="checkpoint directory")

    p = add("finetune", cmd_finetune, "fine-tune a pretrained checkpoint on a task")
    p.add_argument("train")
    p.add_argument("dev")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--task", required=True, choices=KINDS)
    p.add_argument("--labels", help="comma-separated label inventory")
    p.add_argument("--metric")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help="metrics JSON path")

    p = add("export-bias", cmd_export_bias, "write per-head positional bias CSVs")
    p.add_argument("--checkpoint")
    p.add_argument("--length", type=int, default=16)
    p.add_argument("--out", required=True)

    p = add("param-count", cmd_param_count, "count model parameters without allocating them")
    p.add_argument("--vocab", help="take vocabulary sizes from this directory")
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        args.fn(args)
    except (UsageError, ConfigError) as exc:
        print(f"morphlm: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"morphlm {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


def main_entry():  # console script
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
