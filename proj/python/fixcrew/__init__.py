"""Stage-wise multi-agent bug fixing harness: python bindings for the C++ core."""

from ._core import (
    Bm25Index,
    bleu4,
    evaluate,
    exact_match,
    extract_patch,
    filter_instances,
    fix_at_k,
    levenshtein,
    overlap,
    parse_dataset,
    parse_verdict,
    run_benchmark,
    run_pipeline,
    split_dataset,
    tokenize,
    tokenize_kinds,
    validate_instance,
    __version__,
)

__all__ = [
    "Bm25Index",
    "bleu4",
    "evaluate",
    "exact_match",
    "extract_patch",
    "filter_instances",
    "fix_at_k",
    "levenshtein",
    "overlap",
    "parse_dataset",
    "parse_verdict",
    "run_benchmark",
    "run_pipeline",
    "split_dataset",
    "tokenize",
    "tokenize_kinds",
    "validate_instance",
    "__version__",
]
