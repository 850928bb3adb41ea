"""Noise-robust extractive QA with teacher-student distillation."""

from ._core import (
    __version__,
    calibrate_noise,
    exact_match,
    extract_span,
    f1_score,
    generate_toy_corpus,
    kd_loss,
    normalize_answer,
    run_cli,
    softmax_temp,
    tokenize,
    word_error_rate,
)

__all__ = [
    "__version__",
    "calibrate_noise",
    "exact_match",
    "extract_span",
    "f1_score",
    "generate_toy_corpus",
    "kd_loss",
    "normalize_answer",
    "run_cli",
    "softmax_temp",
    "tokenize",
    "word_error_rate",
]
