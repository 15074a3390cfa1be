"""Hyperparameter optimization over mixed-type search spaces.

Two backends share one interface: a genetic algorithm for cheap objectives
and a Gaussian-process optimizer with expected improvement for expensive
ones. ``select_backend`` picks between them by timing a single probe
evaluation against a wall-clock threshold.
"""

from .space import Configuration, Dimension, SearchSpace, boolean, categorical, integer, real
from .result import Evaluation, OptimizationResult
from .ga import ga_optimize
from .bo import bo_optimize
from .backend import ProbeResult, backend_for_probe, probe_objective, select_backend

__all__ = [
    "Configuration",
    "Dimension",
    "SearchSpace",
    "integer",
    "real",
    "categorical",
    "boolean",
    "Evaluation",
    "OptimizationResult",
    "ga_optimize",
    "bo_optimize",
    "ProbeResult",
    "probe_objective",
    "backend_for_probe",
    "select_backend",
]
