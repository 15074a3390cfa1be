"""Typed classification datasets and their 23 descriptive meta-features.

A dataset is a CSV with a header row plus a sidecar JSON schema declaring each
column as numeric or categorical and naming the (categorical) target column.
The feature vector f1..f23 summarizes the target distribution, the mix of
numeric and categorical common attributes, the class structure of the
categorical attribute with the fewest and the most classes, and min/max/
variance statistics of the numeric attributes' means and variances.

Conventions: entropies use base-2 logarithms; variances are population
variances; when a group of attributes is empty its features are zero
(distinguishable through the f5/f6 counts); ties for fewest/most classes go to
the smaller column index. Missing values are rejected at load time.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InputError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

FEATURE_NAMES: tuple[str, ...] = tuple(f"f{i}" for i in range(1, 24))


@dataclass(frozen=True)
class Dataset:
    """A validated classification dataset.

    ``attributes`` keeps CSV column order; ``target_index`` points at the
    categorical class column. Rows hold floats for numeric attributes and
    strings for categorical ones; no missing values.
    """

    name: str
    attributes: tuple[tuple[str, str], ...]
    target_index: int
    rows: tuple[tuple[float | str, ...], ...]

    def __post_init__(self):
        kinds = {kind for _, kind in self.attributes}
        if not kinds <= {NUMERIC, CATEGORICAL}:
            raise InputError(f"dataset {self.name!r}: unknown attribute kind in {sorted(kinds)}")
        if self.attributes[self.target_index][1] != CATEGORICAL:
            raise InputError(f"dataset {self.name!r}: target attribute must be categorical")
        if len(self.rows) < 2:
            raise InputError(f"dataset {self.name!r}: need at least 2 rows")
        arity = len(self.attributes)
        for i, row in enumerate(self.rows):
            if len(row) != arity:
                raise InputError(f"dataset {self.name!r}: row {i + 1} has {len(row)} values, expected {arity}")
        if len(set(self.labels())) < 2:
            raise InputError(f"dataset {self.name!r}: target needs at least 2 distinct classes")

    def labels(self) -> tuple[str, ...]:
        return tuple(row[self.target_index] for row in self.rows)

    def common_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.attributes)) if i != self.target_index)

    def numeric_indices(self) -> tuple[int, ...]:
        return tuple(i for i in self.common_indices() if self.attributes[i][1] == NUMERIC)

    def categorical_indices(self) -> tuple[int, ...]:
        """Categorical common attributes; the target is never included."""
        return tuple(i for i in self.common_indices() if self.attributes[i][1] == CATEGORICAL)

    def column(self, index: int) -> tuple:
        return tuple(row[index] for row in self.rows)

    def class_count(self) -> int:
        return len(set(self.labels()))


def load_schema(schema_path: str | Path) -> tuple[str, dict[str, str]]:
    with Path(schema_path).open("r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or "target" not in raw or "columns" not in raw:
        raise InputError(f"{schema_path}: schema must be an object with 'target' and 'columns'")
    columns = raw["columns"]
    if not isinstance(columns, dict):
        raise InputError(f"{schema_path}: 'columns' must map column names to kinds")
    for name, kind in columns.items():
        if kind not in (NUMERIC, CATEGORICAL):
            raise InputError(f"{schema_path}: column {name!r} has unknown kind {kind!r}")
    target = raw["target"]
    if target not in columns:
        raise InputError(f"{schema_path}: target column {target!r} not declared in 'columns'")
    return target, dict(columns)


def load_dataset(data_path: str | Path, schema_path: str | Path) -> Dataset:
    """Load a CSV + schema pair into a validated Dataset.

    Errors carry the offending row/column: arity mismatches, missing values
    (empty cells), and non-numeric tokens in numeric columns are all rejected.
    """
    data_path = Path(data_path)
    target, columns = load_schema(schema_path)

    with data_path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{data_path.name}: empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise InputError(f"{data_path.name}: duplicate column names in the header")
        missing = [h for h in header if h not in columns]
        if missing:
            raise InputError(f"{data_path.name}: columns {missing} not declared in the schema")
        undeclared = [c for c in columns if c not in header]
        if undeclared:
            raise InputError(f"{data_path.name}: schema declares absent columns {undeclared}")
        if target not in header:
            raise InputError(f"{data_path.name}: target column {target!r} not present")

        attributes = tuple((name, columns[name]) for name in header)
        target_index = header.index(target)

        rows: list[tuple[float | str, ...]] = []
        for line_no, raw_row in enumerate(reader, start=2):
            if len(raw_row) != len(header):
                raise InputError(
                    f"{data_path.name} line {line_no}: {len(raw_row)} values, expected {len(header)}"
                )
            row: list[float | str] = []
            for name, kind, token in zip(header, (columns[h] for h in header), raw_row):
                token = token.strip()
                if token == "":
                    raise InputError(f"{data_path.name} line {line_no}: missing value in column {name!r}")
                if kind == NUMERIC:
                    try:
                        value: float | str = float(token)
                    except ValueError:
                        raise InputError(
                            f"{data_path.name} line {line_no}: non-numeric value {token!r} "
                            f"in numeric column {name!r}"
                        ) from None
                    if not math.isfinite(value):
                        raise InputError(
                            f"{data_path.name} line {line_no}: non-finite value in numeric column {name!r}"
                        )
                else:
                    value = token
                row.append(value)
            rows.append(tuple(row))

    return Dataset(name=data_path.stem, attributes=attributes, target_index=target_index, rows=tuple(rows))


def _entropy(values: Sequence[str]) -> float:
    counts = Counter(values)
    m = len(values)
    return -sum((c / m) * math.log2(c / m) for c in counts.values())


def _proportions(values: Sequence[str]) -> tuple[float, float]:
    counts = Counter(values)
    m = len(values)
    return max(counts.values()) / m, min(counts.values()) / m


def extract(dataset: Dataset) -> "MetaFeatureVector":
    """Compute the f1..f23 meta-feature vector of a dataset."""
    m = len(dataset.rows)
    labels = dataset.labels()
    n = len(dataset.common_indices())
    numeric = dataset.numeric_indices()
    categorical = dataset.categorical_indices()

    values = np.zeros(23)
    values[0] = len(set(labels))                     # f1
    values[1] = _entropy(labels)                     # f2
    values[2], values[3] = _proportions(labels)      # f3, f4
    values[4] = len(numeric)                         # f5
    values[5] = len(categorical)                     # f6
    values[6] = len(numeric) / n if n else 0.0       # f7
    values[7] = n                                    # f8
    values[8] = m                                    # f9

    if categorical:
        class_counts = [len(set(dataset.column(i))) for i in categorical]
        fewest = categorical[min(range(len(categorical)), key=class_counts.__getitem__)]
        most = categorical[max(range(len(categorical)), key=class_counts.__getitem__)]
        values[9] = min(class_counts)                           # f10
        values[10] = _entropy(dataset.column(fewest))           # f11
        values[11], values[12] = _proportions(dataset.column(fewest))  # f12, f13
        values[13] = max(class_counts)                          # f14
        values[14] = _entropy(dataset.column(most))             # f15
        values[15], values[16] = _proportions(dataset.column(most))    # f16, f17

    if numeric:
        cols = [np.asarray(dataset.column(i), dtype=float) for i in numeric]
        means = np.array([c.mean() for c in cols])
        variances = np.array([c.var() for c in cols])
        values[17] = means.min()                     # f18
        values[18] = means.max()                     # f19
        values[19] = variances.min()                 # f20
        values[20] = variances.max()                 # f21
        if len(numeric) > 1:
            values[21] = means.var()                 # f22
            values[22] = variances.var()             # f23

    return MetaFeatureVector(values=tuple(float(v) for v in values))


@dataclass(frozen=True)
class MetaFeatureVector:
    """The 23 meta-feature values, addressable by name (f1..f23)."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != 23:
            raise ValueError(f"expected 23 features, got {len(self.values)}")

    def __getitem__(self, name: str) -> float:
        return self.values[FEATURE_NAMES.index(name)]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))
