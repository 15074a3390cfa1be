"""Evaluation-cost-based choice between the GA and BO backends.

One evaluation of the space's default configuration is timed; objectives
cheaper than the threshold (10 minutes by default) get the evaluation-hungry
genetic algorithm, expensive or failing ones get the sample-efficient
Bayesian optimizer.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

from .space import Configuration

GA = "ga"
BO = "bo"
DEFAULT_THRESHOLD_SECONDS = 600.0


@dataclass(frozen=True)
class ProbeResult:
    elapsed_seconds: float
    score: float | None
    failed: bool


def probe_objective(
    objective: Callable[[Configuration], float],
    configuration: Configuration,
    clock: Callable[[], float] = time.monotonic,
) -> ProbeResult:
    """Time a single evaluation; a raised exception marks the probe failed."""
    start = clock()
    try:
        score = float(objective(configuration))
    except Exception:
        return ProbeResult(elapsed_seconds=clock() - start, score=None, failed=True)
    return ProbeResult(elapsed_seconds=clock() - start, score=score, failed=False)


def backend_for_probe(probe: ProbeResult, threshold_seconds: float = DEFAULT_THRESHOLD_SECONDS) -> str:
    if probe.failed:
        return BO
    return GA if probe.elapsed_seconds < threshold_seconds else BO


def select_backend(
    objective: Callable[[Configuration], float],
    probe_configuration: Configuration,
    threshold_seconds: float = DEFAULT_THRESHOLD_SECONDS,
    clock: Callable[[], float] = time.monotonic,
) -> str:
    """Return "ga" when one probe evaluation runs under the threshold, else "bo"."""
    return backend_for_probe(probe_objective(objective, probe_configuration, clock), threshold_seconds)
