"""analyze -> tag -> tokenize over a raw corpus, deterministic for any worker count.

Sentences are cut into fixed-size chunks.  Pass 1 accumulates transition
counts per chunk; chunk counts are summed in chunk order, so the tables do not
depend on how chunks were spread across processes.  Pass 2 decodes and
tokenizes each chunk with those tables and the outputs are concatenated in
order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from ..morphology import Analysis, Grammar, analyze, load_counts, load_grammar
from ..tagger import (
    DEFAULT_ALPHA, EmissionConfig, TransitionCounts, TransitionTables, decode_bidirectional,
    sentence_emissions,
)
from ..vocab import BPE_PREFIX, Vocab
from .corpus import TokenLine, format_parsed, read_raw

CHUNK_SENTENCES = 8


@dataclass(frozen=True)
class TaggerSettings:
    grammar_path: str
    counts_path: str | None = None
    emission: Mapping | None = None
    alpha: float = DEFAULT_ALPHA


_STATE: dict = {}


def _setup(settings: TaggerSettings):
    if _STATE.get("settings") == settings:
        return
    g = load_grammar(settings.grammar_path)
    counts = load_counts(settings.counts_path) if settings.counts_path else {}
    _STATE.update(settings=settings, grammar=g, counts=counts,
                  config=EmissionConfig.from_dict(settings.emission),
                  precedence={t.name: t.weight for t in g.pos_tags})


def _lattice(words):
    g = _STATE["grammar"]
    analyses = [analyze(g, w, _STATE["counts"]) for w in words]
    return sentence_emissions(analyses, _STATE["precedence"], g.agreement, _STATE["config"])


def _count_chunk(args):
    settings, sentences = args
    _setup(settings)
    c = TransitionCounts(_STATE["grammar"].tag_names)
    for words in sentences:
        c.add_sentence(_lattice(words))
    return c.pair, c.triple, c.n_tokens


def _decode_chunk(args):
    settings, tables, sentences = args
    _setup(settings)
    out = []
    for words in sentences:
        d = decode_bidirectional(_lattice(words), tables, _STATE["precedence"])
        out.append([(w, e.analysis, sc) for w, e, sc in zip(words, d.entries, d.log_scores)])
    return out


def _run(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def _chunks(sentences, size=CHUNK_SENTENCES):
    return [sentences[i:i + size] for i in range(0, len(sentences), size)]


def estimate_corpus_tables(settings: TaggerSettings, sentences, workers: int = 1) -> TransitionTables:
    _setup(settings)
    tags = _STATE["grammar"].tag_names
    total = TransitionCounts(tags)
    for pair, triple, n in _run(_count_chunk, [(settings, c) for c in _chunks(sentences)], workers):
        total = total + TransitionCounts(tags, pair, triple, n)
    return TransitionTables.from_counts(total, settings.alpha)


def tag_corpus(settings: TaggerSettings, sentences: Sequence[Sequence[str]], workers: int = 1,
               tables: TransitionTables | None = None):
    """Per sentence: [(surface, chosen Analysis, decoding log score)], plus the tables used."""
    if not sentences:
        return [], None
    if tables is None:
        tables = estimate_corpus_tables(settings, sentences, workers)
    jobs = [(settings, tables, c) for c in _chunks(sentences)]
    tagged = [s for chunk in _run(_decode_chunk, jobs, workers) for s in chunk]
    return tagged, tables


def token_lines(tagged_sentence, vocab: Vocab) -> list[TokenLine]:
    out = []
    for surface, a, score in tagged_sentence:
        if a.is_bpe_fallback:
            for text, key in vocab.bpe_pieces(a.surface):
                out.append(TokenLine(text, key, a.pos_tag, (), score))
        else:
            out.append(TokenLine(surface, a.stem, a.pos_tag, a.affixes, score))
    return out


def preprocess(raw_path, settings: TaggerSettings, vocab: Vocab, workers: int = 1,
               out_path=None) -> str:
    """Returns (and optionally writes) the parsed-corpus text."""
    docs = read_raw(raw_path)
    flat = [s for d in docs for s in d]
    tagged, _ = tag_corpus(settings, flat, workers)
    it = iter(tagged)
    out_docs = [[token_lines(next(it), vocab) for _ in d] for d in docs]
    text = format_parsed(out_docs)
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text


def pieces_from_lines(lines: Sequence[TokenLine], vocab: Vocab):
    return [vocab.piece(t.stem, t.pos_tag, t.affixes, t.surface) for t in lines]


def analyses_from_lines(sentences: Sequence[Sequence[TokenLine]]):
    """Rebuild Analysis records from parsed-corpus lines (BPE pieces are skipped)."""
    return [Analysis(t.surface.lower(), t.stem, tuple(t.affixes), t.pos_tag)
            for s in sentences for t in s if not t.stem.startswith(BPE_PREFIX)]
