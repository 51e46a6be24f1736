"""Corpus preprocessing, fine-tuning, metrics and the command-line interface."""

from .corpus import (
    DataError, TokenLine, format_parsed, iter_parsed, parse_token_line, read_parsed, read_raw,
    split_sentences, write_parsed,
)
from .preprocess import (
    CHUNK_SENTENCES, TaggerSettings, analyses_from_lines, estimate_corpus_tables, pieces_from_lines,
    preprocess, tag_corpus, token_lines,
)
from .metrics import UndefinedMetricError, accuracy, f1_micro, pearson, spans, spearman
from .finetune import (
    KINDS, METRICS, Example, FinetuneConfig, FinetuneModel, FinetuneResult, TaskSpec, TextEncoder,
    check_labels, evaluate, finetune, label_inventory, predict, read_task_file,
)
from .synthetic import as_token_lines, synthetic_sentences

__all__ = [
    "DataError", "TokenLine", "format_parsed", "iter_parsed", "parse_token_line", "read_parsed",
    "read_raw", "split_sentences", "write_parsed",
    "CHUNK_SENTENCES", "TaggerSettings", "analyses_from_lines", "estimate_corpus_tables",
    "pieces_from_lines", "preprocess", "tag_corpus", "token_lines",
    "UndefinedMetricError", "accuracy", "f1_micro", "pearson", "spans", "spearman",
    "KINDS", "METRICS", "Example", "FinetuneConfig", "FinetuneModel", "FinetuneResult", "TaskSpec",
    "TextEncoder", "check_labels", "evaluate", "finetune", "label_inventory", "predict",
    "read_task_file", "as_token_lines", "synthetic_sentences",
]
