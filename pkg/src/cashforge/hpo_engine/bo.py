"""Bayesian-optimization backend: GP surrogate + expected improvement.

Configurations are embedded into [0, 1]^d (ranged dimensions scaled,
categoricals/booleans one-hot). After a small random initial design, a
Gaussian process with a squared-exponential kernel is fit to the standardized
scores; its length scale and noise level are picked from fixed log grids by
maximum marginal likelihood. The next point maximizes expected improvement
over a batch of random candidate embeddings and is snapped back to the
nearest valid configuration before evaluation.
"""

from __future__ import annotations

import math
import time
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from ..errors import CashForgeError, SurrogateError
from .result import Evaluation, OptimizationResult, best_of
from .space import Configuration, SearchSpace

INITIAL_DESIGN = 5
CANDIDATE_COUNT = 1000
LENGTH_SCALE_GRID = tuple(np.logspace(-2, 1, 7))
NOISE_GRID = tuple(np.logspace(-8, -2, 4))
JITTER_START = 1e-8
JITTER_LIMIT = 1e-2


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.maximum(
        (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T, 0.0
    )


def _kernel(a: np.ndarray, b: np.ndarray, length_scale: float) -> np.ndarray:
    return np.exp(-_sq_dists(a, b) / (2.0 * length_scale**2))


class GaussianProcess:
    """Unit-signal-variance SE-kernel GP over standardized targets."""

    def __init__(self, length_scale: float, noise: float):
        self.length_scale = length_scale
        self.noise = noise
        self._x: np.ndarray | None = None
        self._chol = None
        self._alpha: np.ndarray | None = None
        self.log_marginal_likelihood = -math.inf

    def fit(self, x: np.ndarray, y: np.ndarray) -> "GaussianProcess":
        k = _kernel(x, x, self.length_scale)
        k[np.diag_indices_from(k)] += self.noise
        jitter = 0.0
        while True:
            try:
                chol = cho_factor(k + jitter * np.eye(len(k)), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
                if jitter > JITTER_LIMIT:
                    raise SurrogateError(
                        f"kernel matrix singular even with jitter {JITTER_LIMIT:g}"
                    ) from None
        alpha = cho_solve(chol, y)
        log_det = 2.0 * np.sum(np.log(np.diag(chol[0])))
        self._x, self._chol, self._alpha = x, chol, alpha
        self.log_marginal_likelihood = float(
            -0.5 * y @ alpha - 0.5 * log_det - 0.5 * len(y) * math.log(2.0 * math.pi)
        )
        return self

    def predict(self, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ks = _kernel(query, self._x, self.length_scale)
        mean = ks @ self._alpha
        solved = cho_solve(self._chol, ks.T)
        var = 1.0 + self.noise - np.einsum("ij,ji->i", ks, solved)
        return mean, np.sqrt(np.maximum(var, 0.0))


def fit_surrogate(
    x: np.ndarray,
    y: np.ndarray,
    length_scales: Sequence[float] = LENGTH_SCALE_GRID,
    noise_levels: Sequence[float] = NOISE_GRID,
) -> GaussianProcess:
    """Grid-select (length scale, noise) by maximum marginal likelihood."""
    best: GaussianProcess | None = None
    for ls in length_scales:
        for noise in noise_levels:
            gp = GaussianProcess(ls, noise).fit(x, y)
            if best is None or gp.log_marginal_likelihood > best.log_marginal_likelihood:
                best = gp
    return best


def _raw_expected_improvement(mean: np.ndarray, std: np.ndarray, incumbent: float) -> np.ndarray:
    """Analytic EI formula before the final clip at zero."""
    improve = mean - incumbent
    positive = std > 0
    raw = np.where(positive, 0.0, np.maximum(improve, 0.0))
    z = np.zeros_like(raw)
    z[positive] = improve[positive] / std[positive]
    raw[positive] = improve[positive] * norm.cdf(z[positive]) + std[positive] * norm.pdf(z[positive])
    return raw


def expected_improvement(mean: np.ndarray, std: np.ndarray, incumbent: float) -> np.ndarray:
    """EI for maximization; nonnegative by definition (the analytic formula
    can only dip below zero by float rounding, which is clipped)."""
    return np.maximum(_raw_expected_improvement(mean, std, incumbent), 0.0)


def bo_optimize(
    space: SearchSpace,
    objective: Callable[[Configuration], float],
    max_evaluations: int,
    time_limit: float | None = None,
    seed: int = 0,
    initial_configurations: Sequence[Configuration] = (),
    initial_design: int = INITIAL_DESIGN,
    candidate_count: int = CANDIDATE_COUNT,
    length_scales: Sequence[float] = LENGTH_SCALE_GRID,
    noise_levels: Sequence[float] = NOISE_GRID,
    clock: Callable[[], float] = time.monotonic,
) -> OptimizationResult:
    """Maximize the objective with GP-based sequential search.

    The first min(initial_design, max_evaluations) points are random (after
    any injected ``initial_configurations``); every later point maximizes
    expected improvement over ``candidate_count`` random embeddings. Failed
    evaluations score -inf in the history and are excluded from the surrogate
    fit.
    """
    if max_evaluations < 2:
        raise CashForgeError("max_evaluations must be >= 2")
    rng = np.random.default_rng(seed)
    start = clock()
    history: list[Evaluation] = []
    embeddings: list[np.ndarray] = []
    scores: list[float] = []
    min_ei_log: list[float] = []
    raw_min_ei_log: list[float] = []

    def out_of_time() -> bool:
        return time_limit is not None and clock() - start >= time_limit

    def evaluate(config: Configuration) -> None:
        try:
            score = float(objective(config))
            if not (math.isfinite(score) or score == -math.inf):
                score = -math.inf
        except Exception:
            score = -math.inf
        history.append(Evaluation(dict(config), score, clock() - start))
        embeddings.append(space.embed(config))
        scores.append(score)

    def finish() -> OptimizationResult:
        best_config, best_score = best_of(history, space.sort_key)
        return OptimizationResult(
            best_configuration=best_config,
            best_score=best_score,
            evaluation_count=len(history),
            history=tuple(history),
            diagnostics={
                "min_expected_improvement": min_ei_log,
                "raw_min_expected_improvement": raw_min_ei_log,
            },
        )

    design: list[Configuration] = [space.validate(c) for c in initial_configurations]
    n_init = max(len(design), min(initial_design, max_evaluations))
    while len(design) < n_init:
        design.append(space.sample(rng))
    for config in design[:max_evaluations]:
        if out_of_time() and history:
            return finish()
        evaluate(config)

    dim = space.embedding_dim()
    while len(history) < max_evaluations:
        if out_of_time():
            return finish()
        ok = [i for i, s in enumerate(scores) if s != -math.inf]
        if not ok:
            raise CashForgeError("every configuration evaluated so far has failed")
        x = np.vstack([embeddings[i] for i in ok])
        y = np.asarray([scores[i] for i in ok])
        y_std = float(y.std())
        y_scaled = (y - y.mean()) / (y_std if y_std > 1e-12 else 1.0)

        candidates = rng.uniform(0.0, 1.0, size=(candidate_count, dim))
        gp = fit_surrogate(x, y_scaled, length_scales, noise_levels)
        mean, std = gp.predict(candidates)
        incumbent = float(y_scaled.max())
        ei = expected_improvement(mean, std, incumbent)
        raw_min_ei_log.append(float(_raw_expected_improvement(mean, std, incumbent).min()))
        min_ei_log.append(float(ei.min()))

        winner = int(np.argmax(ei))
        evaluate(space.snap(candidates[winner]))

    return finish()
