"""Fine-grained machine-generated-text detection."""

from ._core import (
    Bundle,
    ConfigError,
    DataError,
    Document,
    GenerationError,
    IntegrityError,
    TransportError,
    bleu,
    coarse_classes,
    evaluate,
    fine_classes,
    load,
    read_jsonl,
    synth_corpus,
    token_length,
    tokenize,
    train,
    write_jsonl,
)

__all__ = [
    "Bundle",
    "ConfigError",
    "DataError",
    "Document",
    "GenerationError",
    "IntegrityError",
    "TransportError",
    "bleu",
    "coarse_classes",
    "evaluate",
    "fine_classes",
    "load",
    "read_jsonl",
    "synth_corpus",
    "token_length",
    "tokenize",
    "train",
    "write_jsonl",
]
