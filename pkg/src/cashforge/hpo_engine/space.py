"""Mixed-type search spaces: typed dimensions and points in their product.

A Configuration is a plain dict mapping dimension names to values; objectives
receive it directly. Spaces also know how to embed configurations into a real
vector (ranged dimensions min-max scaled to [0, 1], categoricals and booleans
one-hot) and how to snap an arbitrary embedding back to the nearest valid
configuration, which is what the Bayesian backend optimizes over.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from ..errors import InputError

Configuration = dict[str, Any]

INTEGER = "integer"
REAL = "real"
CATEGORICAL = "categorical"
BOOLEAN = "boolean"


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    options: tuple | None = None

    def __post_init__(self):
        if self.kind in (INTEGER, REAL):
            if self.low is None or self.high is None or not self.low < self.high:
                raise InputError(f"dimension {self.name!r}: ranged kinds need low < high")
        elif self.kind == CATEGORICAL:
            if not self.options or len(set(self.options)) != len(self.options):
                raise InputError(f"dimension {self.name!r}: options must be non-empty and distinct")
        elif self.kind != BOOLEAN:
            raise InputError(f"dimension {self.name!r}: unknown kind {self.kind!r}")

    def contains(self, value) -> bool:
        if self.kind == INTEGER:
            return isinstance(value, (int, np.integer)) and not isinstance(value, bool) and self.low <= value <= self.high
        if self.kind == REAL:
            return isinstance(value, (int, float, np.floating)) and not isinstance(value, bool) and self.low <= value <= self.high
        if self.kind == CATEGORICAL:
            return value in self.options
        return isinstance(value, (bool, np.bool_))

    def sample(self, rng: np.random.Generator):
        if self.kind == INTEGER:
            return int(rng.integers(int(self.low), int(self.high) + 1))
        if self.kind == REAL:
            return float(rng.uniform(self.low, self.high))
        if self.kind == CATEGORICAL:
            return self.options[int(rng.integers(len(self.options)))]
        return bool(rng.integers(2))

    def default(self):
        """Midpoint of ranges, first option, False for booleans."""
        if self.kind == INTEGER:
            return int((int(self.low) + int(self.high)) // 2)
        if self.kind == REAL:
            return float((self.low + self.high) / 2.0)
        if self.kind == CATEGORICAL:
            return self.options[0]
        return False

    def mutate(self, value, rng: np.random.Generator, span_fraction: float = 0.1):
        """Ranged kinds move within +-span_fraction of the range (clamped);
        categoricals and booleans resample uniformly."""
        if self.kind in (INTEGER, REAL):
            span = span_fraction * (self.high - self.low)
            moved = value + rng.uniform(-span, span)
            moved = min(max(moved, self.low), self.high)
            return int(round(moved)) if self.kind == INTEGER else float(moved)
        return self.sample(rng)

    def sort_value(self, value):
        """Canonical comparable form used for deterministic tie-breaking."""
        if self.kind == CATEGORICAL:
            return self.options.index(value)
        if self.kind == BOOLEAN:
            return int(value)
        return value

    def embedding_width(self) -> int:
        if self.kind == CATEGORICAL:
            return len(self.options)
        if self.kind == BOOLEAN:
            return 2
        return 1

    def embed(self, value) -> list[float]:
        if self.kind in (INTEGER, REAL):
            return [(float(value) - self.low) / (self.high - self.low)]
        if self.kind == CATEGORICAL:
            vec = [0.0] * len(self.options)
            vec[self.options.index(value)] = 1.0
            return vec
        return [1.0, 0.0] if not value else [0.0, 1.0]

    def snap(self, block: np.ndarray):
        """Nearest valid value for one embedded block of this dimension."""
        if self.kind == INTEGER:
            raw = self.low + float(block[0]) * (self.high - self.low)
            return int(min(max(round(raw), int(self.low)), int(self.high)))
        if self.kind == REAL:
            raw = self.low + float(block[0]) * (self.high - self.low)
            return float(min(max(raw, self.low), self.high))
        if self.kind == CATEGORICAL:
            return self.options[int(np.argmax(block))]
        return bool(np.argmax(block))


def integer(name: str, low: int, high: int) -> Dimension:
    return Dimension(name, INTEGER, low=low, high=high)


def real(name: str, low: float, high: float) -> Dimension:
    return Dimension(name, REAL, low=low, high=high)


def categorical(name: str, options: Iterable) -> Dimension:
    return Dimension(name, CATEGORICAL, options=tuple(options))


def boolean(name: str) -> Dimension:
    return Dimension(name, BOOLEAN)


@dataclass(frozen=True)
class SearchSpace:
    dimensions: tuple[Dimension, ...]

    def __post_init__(self):
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise InputError("dimension names must be unique")
        if not self.dimensions:
            raise InputError("a search space needs at least one dimension")

    def validate(self, config: Mapping) -> Configuration:
        if set(config) != {d.name for d in self.dimensions}:
            raise InputError(
                f"configuration keys {sorted(config)} do not match dimensions "
                f"{sorted(d.name for d in self.dimensions)}"
            )
        for dim in self.dimensions:
            if not dim.contains(config[dim.name]):
                raise InputError(f"value {config[dim.name]!r} outside dimension {dim.name!r}")
        return dict(config)

    def sample(self, rng: np.random.Generator) -> Configuration:
        return {d.name: d.sample(rng) for d in self.dimensions}

    def default_configuration(self) -> Configuration:
        return {d.name: d.default() for d in self.dimensions}

    def sort_key(self, config: Mapping) -> tuple:
        return tuple(d.sort_value(config[d.name]) for d in self.dimensions)

    def embedding_dim(self) -> int:
        return sum(d.embedding_width() for d in self.dimensions)

    def embed(self, config: Mapping) -> np.ndarray:
        flat: list[float] = []
        for d in self.dimensions:
            flat.extend(d.embed(config[d.name]))
        return np.asarray(flat)

    def snap(self, vector: np.ndarray) -> Configuration:
        config: Configuration = {}
        offset = 0
        for d in self.dimensions:
            width = d.embedding_width()
            config[d.name] = d.snap(np.asarray(vector[offset : offset + width]))
            offset += width
        return config


def space_to_dict(space: SearchSpace) -> list[dict]:
    out = []
    for d in space.dimensions:
        entry: dict = {"name": d.name, "kind": d.kind}
        if d.kind in (INTEGER, REAL):
            entry["low"], entry["high"] = d.low, d.high
        elif d.kind == CATEGORICAL:
            entry["options"] = list(d.options)
        out.append(entry)
    return out


def space_from_dict(entries: list[dict]) -> SearchSpace:
    dims = []
    for entry in entries:
        kind = entry.get("kind")
        name = entry.get("name")
        if not isinstance(name, str):
            raise InputError("every dimension needs a string 'name'")
        if kind == INTEGER:
            dims.append(integer(name, int(entry["low"]), int(entry["high"])))
        elif kind == REAL:
            dims.append(real(name, float(entry["low"]), float(entry["high"])))
        elif kind == CATEGORICAL:
            dims.append(categorical(name, entry["options"]))
        elif kind == BOOLEAN:
            dims.append(boolean(name))
        else:
            raise InputError(f"dimension {name!r}: unknown kind {kind!r}")
    return SearchSpace(tuple(dims))


def load_space(path: str | Path) -> SearchSpace:
    with Path(path).open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise InputError(f"{path}: space file must be a JSON list of dimensions")
    return space_from_dict(data)
