"""Run configuration: built-in defaults, TOML overrides, strict validation.

The file mirrors the knobs the engine modules expose. Unknown sections or
keys are rejected by name so typos never silently fall back to defaults.
Merge order is defaults < config file < command-line flags.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import InputError

ENV_CONFIG_PATH = "CASH_FORGE_CONFIG"


@dataclass
class GaSettings:
    population: int = 50
    generations: int = 100
    crossover_rate: float = 0.9
    tournament_size: int = 3
    mutation_span: float = 0.1


@dataclass
class BoSettings:
    initial_design: int = 5
    candidates: int = 1000
    length_scales: list[float] = field(default_factory=lambda: [0.01, 0.0316, 0.1, 0.316, 1.0, 3.16, 10.0])
    noise_levels: list[float] = field(default_factory=lambda: [1e-8, 1e-6, 1e-4, 1e-2])


@dataclass
class MlpSettings:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epsilon: float = 1e-8
    early_stopping_patience: int = 10
    early_stopping_tol: float = 1e-4
    invscaling_power: float = 0.5


@dataclass
class CvSettings:
    fitness_folds: int = 5   # inner CV for feature/architecture fitness
    score_folds: int = 10    # final performance metric


@dataclass
class BackendSettings:
    threshold_seconds: float = 600.0


@dataclass
class BudgetSettings:
    tuning_time_limit: float = 1000.0


@dataclass
class PipelineSettings:
    min_algorithms: int = 5
    architecture_precision: float = -0.0015


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 0  # 0 = one worker per available core
    ga: GaSettings = field(default_factory=GaSettings)
    bo: BoSettings = field(default_factory=BoSettings)
    mlp: MlpSettings = field(default_factory=MlpSettings)
    cv: CvSettings = field(default_factory=CvSettings)
    backend: BackendSettings = field(default_factory=BackendSettings)
    budgets: BudgetSettings = field(default_factory=BudgetSettings)
    pipeline: PipelineSettings = field(default_factory=PipelineSettings)

    def worker_count(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def validate(self) -> "RunConfig":
        checks = [
            (self.ga.population >= 2, "ga.population must be >= 2"),
            (self.ga.generations >= 1, "ga.generations must be >= 1"),
            (0.0 <= self.ga.crossover_rate <= 1.0, "ga.crossover_rate must be in [0, 1]"),
            (self.ga.tournament_size >= 1, "ga.tournament_size must be >= 1"),
            (self.bo.initial_design >= 1, "bo.initial_design must be >= 1"),
            (self.bo.candidates >= 1, "bo.candidates must be >= 1"),
            (self.mlp.learning_rate > 0, "mlp.learning_rate must be > 0"),
            (self.mlp.batch_size >= 1, "mlp.batch_size must be >= 1"),
            (self.cv.fitness_folds >= 2, "cv.fitness_folds must be >= 2"),
            (self.cv.score_folds >= 2, "cv.score_folds must be >= 2"),
            (self.backend.threshold_seconds > 0, "backend.threshold_seconds must be > 0"),
            (self.budgets.tuning_time_limit > 0, "budgets.tuning_time_limit must be > 0"),
            (self.pipeline.min_algorithms >= 1, "pipeline.min_algorithms must be >= 1"),
            (self.threads >= 0, "threads must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise InputError(f"invalid configuration: {message}")
        return self


_SECTION_TYPES = {
    "ga": GaSettings,
    "bo": BoSettings,
    "mlp": MlpSettings,
    "cv": CvSettings,
    "backend": BackendSettings,
    "budgets": BudgetSettings,
    "pipeline": PipelineSettings,
}
_SCALAR_KEYS = {"seed": int, "threads": int}


def _apply_section(target, section_name: str, values: dict) -> None:
    known = {f.name: f for f in dataclasses.fields(target)}
    for key, value in values.items():
        if key not in known:
            raise InputError(f"unknown configuration key {section_name}.{key!r}")
        current = getattr(target, key)
        if isinstance(current, bool) or isinstance(value, dict):
            raise InputError(f"configuration key {section_name}.{key!r} has the wrong shape")
        if isinstance(current, int) and not isinstance(value, int):
            raise InputError(f"configuration key {section_name}.{key!r} must be an integer")
        if isinstance(current, float):
            value = float(value)
        if isinstance(current, list):
            value = [float(v) for v in value]
        setattr(target, key, value)


def load_config(path: str | Path | None) -> RunConfig:
    """Defaults merged with a TOML file when given; unknown keys rejected."""
    config = RunConfig()
    if path is None:
        return config.validate()
    with Path(path).open("rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"{path}: invalid TOML ({exc})") from exc
    for key, value in raw.items():
        if key in _SCALAR_KEYS:
            if not isinstance(value, int) or isinstance(value, bool):
                raise InputError(f"configuration key {key!r} must be an integer")
            setattr(config, key, value)
        elif key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise InputError(f"configuration section {key!r} must be a table")
            _apply_section(getattr(config, key), key, value)
        else:
            raise InputError(f"unknown configuration key {key!r}")
    return config.validate()
