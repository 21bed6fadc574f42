"""Python bindings for the tapfm core library."""

from ._tapfm import (
    crf_log_partition,
    crf_viterbi,
    dwa_weights,
    find_lis,
    generate_span_labels,
    number_to_words,
    pairing_matrix,
    slide_windows,
    span_contrastive_loss,
    verbalize,
)

__all__ = [
    "crf_log_partition",
    "crf_viterbi",
    "dwa_weights",
    "find_lis",
    "generate_span_labels",
    "number_to_words",
    "pairing_matrix",
    "slide_windows",
    "span_contrastive_loss",
    "verbalize",
]
