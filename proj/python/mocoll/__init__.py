"""Caption metrics and simulation oracles backed by the mocoll C++ core."""

from ._mocoll import (
    bleu,
    cider,
    compose_report,
    cosine_similarity,
    lcs_length,
    meteor,
    normalize_text,
    rouge_l,
    score_all,
    simulate_world_reports,
    stem,
    tokenize,
)

__all__ = [
    "bleu",
    "cider",
    "compose_report",
    "cosine_similarity",
    "lcs_length",
    "meteor",
    "normalize_text",
    "rouge_l",
    "score_all",
    "simulate_world_reports",
    "stem",
    "tokenize",
]
