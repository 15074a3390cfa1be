"""Shared result type for the optimization backends."""

from __future__ import annotations

from dataclasses import dataclass, field

from .space import Configuration


@dataclass(frozen=True)
class Evaluation:
    configuration: Configuration
    score: float
    elapsed_seconds: float


@dataclass(frozen=True)
class OptimizationResult:
    best_configuration: Configuration
    best_score: float
    evaluation_count: int
    history: tuple[Evaluation, ...]
    diagnostics: dict = field(default_factory=dict)


def best_of(history: list[Evaluation], sort_key) -> tuple[Configuration, float]:
    """Highest score; exact ties resolved by the smallest configuration key."""
    if not history:
        raise ValueError("empty history")
    top = max(e.score for e in history)
    tied = [e for e in history if e.score == top]
    winner = min(tied, key=lambda e: sort_key(e.configuration))
    return dict(winner.configuration), top
