"""Genetic-algorithm backend.

Operators: elitism of one, tournament selection of size three, uniform
crossover applied to 90% of parent pairs with a per-gene coin flip, and
per-gene mutation with probability 1/n (ranged genes move within +-10% of
their range and clamp; categorical and boolean genes resample uniformly).
Failed objective evaluations score -inf instead of aborting the search; a
population consisting solely of failures is an error.
"""

from __future__ import annotations

import math
import time
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import CashForgeError
from .result import Evaluation, OptimizationResult, best_of
from .space import Configuration, SearchSpace

CROSSOVER_RATE = 0.9
TOURNAMENT_SIZE = 3
MUTATION_SPAN = 0.1


def _evaluate(objective: Callable[[Configuration], float], config: Configuration) -> float:
    try:
        score = float(objective(config))
    except Exception:
        return -math.inf
    return score if math.isfinite(score) or score == -math.inf else -math.inf


def ga_optimize(
    space: SearchSpace,
    objective: Callable[[Configuration], float],
    population_size: int = 50,
    max_generations: int = 100,
    stop_score: float | None = None,
    time_limit: float | None = None,
    seed: int = 0,
    initial_configurations: Sequence[Configuration] = (),
    crossover_rate: float = CROSSOVER_RATE,
    tournament_size: int = TOURNAMENT_SIZE,
    mutation_span: float = MUTATION_SPAN,
    clock: Callable[[], float] = time.monotonic,
) -> OptimizationResult:
    """Maximize the objective over the space with a seeded genetic search.

    Terminates at ``max_generations``, at the first generation containing a
    score >= ``stop_score``, or when ``time_limit`` seconds elapse; the best
    configuration seen so far is always returned. ``initial_configurations``
    are injected verbatim into the first population (useful to guarantee the
    search never returns something worse than a known default).
    """
    if population_size < 2:
        raise CashForgeError("population_size must be >= 2")
    rng = np.random.default_rng(seed)
    n_genes = len(space.dimensions)
    mutation_rate = 1.0 / n_genes
    start = clock()
    history: list[Evaluation] = []

    def out_of_time() -> bool:
        return time_limit is not None and clock() - start >= time_limit

    def record(config: Configuration, score: float) -> None:
        history.append(Evaluation(dict(config), score, clock() - start))

    def finish() -> OptimizationResult:
        best_config, best_score = best_of(history, space.sort_key)
        return OptimizationResult(
            best_configuration=best_config,
            best_score=best_score,
            evaluation_count=len(history),
            history=tuple(history),
        )

    population: list[Configuration] = [space.validate(c) for c in initial_configurations][:population_size]
    while len(population) < population_size:
        population.append(space.sample(rng))

    scores: list[float] = []
    for config in population:
        if out_of_time() and history:
            return finish()
        scores.append(_evaluate(objective, config))
        record(config, scores[-1])

    def generation_done(batch: Iterable[float]) -> bool:
        return stop_score is not None and any(s >= stop_score for s in batch)

    if all(s == -math.inf for s in scores):
        raise CashForgeError("every configuration in the population failed to evaluate")
    if generation_done(scores):
        return finish()

    def tournament() -> int:
        contenders = rng.integers(len(population), size=tournament_size)
        return int(max(contenders, key=lambda i: scores[i]))

    for _ in range(max_generations):
        if out_of_time():
            return finish()
        top = max(scores)
        elite_idx = min(
            (i for i, s in enumerate(scores) if s == top),
            key=lambda i: space.sort_key(population[i]),
        )
        next_population = [dict(population[elite_idx])]
        next_scores = [scores[elite_idx]]

        offspring: list[Configuration] = []
        while len(offspring) < population_size - 1:
            p1, p2 = population[tournament()], population[tournament()]
            if rng.random() < crossover_rate:
                child = {
                    d.name: (p1 if rng.random() < 0.5 else p2)[d.name] for d in space.dimensions
                }
            else:
                child = dict(p1)
            for dim in space.dimensions:
                if rng.random() < mutation_rate:
                    child[dim.name] = dim.mutate(child[dim.name], rng, mutation_span)
            offspring.append(child)

        for child in offspring:
            if out_of_time():
                return finish()
            score = _evaluate(objective, child)
            record(child, score)
            next_population.append(child)
            next_scores.append(score)

        population, scores = next_population, next_scores
        if all(s == -math.inf for s in scores):
            raise CashForgeError("every configuration in the population failed to evaluate")
        if generation_done(scores):
            return finish()

    return finish()
