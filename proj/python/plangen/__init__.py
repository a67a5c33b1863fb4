"""Plan generation with self-improving sequence models."""

from ._plangen import (
    Error,
    evaluate,
    generate,
    harvest,
    improve,
    mcnemar,
    normalized_length,
    pretrain,
    regret,
    solve,
    validate,
    wilcoxon,
)

__all__ = [
    "Error",
    "evaluate",
    "generate",
    "harvest",
    "improve",
    "mcnemar",
    "normalized_length",
    "pretrain",
    "regret",
    "solve",
    "validate",
    "wilcoxon",
]
