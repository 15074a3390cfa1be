"""Shared test fixtures: the worked wine example, dataset builders, and the
synthetic experience corpus with a planted (f1, f7) -> algorithm rule."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from cashforge.experience_store import ExperienceRecord, ExperienceStore, PaperMeta

# --- the hand-encoded wine worked example ----------------------------------
# Five papers, one wine record each. Bests cover the documented candidate set
# {RandomForest, BayesNet, LDA, J48, LibSVM}; reliability ascends
# G3 < G4 < G11 < G15 < G18. The derived relations leave BayesNet and J48 as
# the only sources, and J48 wins on comparison evidence (7 beaten vs 6).

WINE = "Wine Dataset"

WINE_PAPERS = [
    PaperMeta("G3", "C", "Conference", 1.0, 5),
    PaperMeta("G4", "C", "Journal", 1.5, 10),
    PaperMeta("G11", "B", "Conference", 2.5, 40),
    PaperMeta("G15", "A", "Conference", 3.0, 80),
    PaperMeta("G18", "A", "Journal", 5.0, 120),
]

WINE_RECORDS = [
    ExperienceRecord("G3", WINE, "LDA", frozenset({"NaiveBayes", "ZeroR"})),
    ExperienceRecord("G4", WINE, "LibSVM", frozenset({"LDA", "Logistic"})),
    ExperienceRecord("G11", WINE, "RandomForest", frozenset({"LDA", "IBk"})),
    ExperienceRecord("G15", WINE, "J48", frozenset({"LibSVM", "OneR", "KStar"})),
    ExperienceRecord("G18", WINE, "BayesNet", frozenset({"RandomForest", "NaiveBayes", "SMO"})),
]

WINE_OACS = {"RandomForest", "BayesNet", "LDA", "J48", "LibSVM"}


def wine_store() -> ExperienceStore:
    return ExperienceStore(papers={p.paper_id: p for p in WINE_PAPERS}, records=tuple(WINE_RECORDS))


def write_wine_jsonl(path: Path) -> Path:
    lines = []
    for p in WINE_PAPERS:
        lines.append(
            {
                "kind": "paper",
                "paper_id": p.paper_id,
                "level": p.level,
                "venue_type": p.venue_type,
                "impact_factor": p.impact_factor,
                "avg_annual_citations": p.avg_annual_citations,
            }
        )
    for r in WINE_RECORDS:
        lines.append(
            {
                "kind": "experience",
                "paper_id": r.paper_id,
                "instance_id": r.instance_id,
                "best_algorithm": r.best_algorithm,
                "other_algorithms": sorted(r.other_algorithms),
            }
        )
    path.write_text("\n".join(json.dumps(line) for line in lines) + "\n", encoding="utf-8")
    return path


# --- dataset builders -------------------------------------------------------


def write_dataset(
    directory: Path,
    name: str,
    header: list[str],
    kinds: dict[str, str],
    target: str,
    rows: list[tuple],
) -> tuple[Path, Path]:
    data_path = directory / f"{name}.csv"
    schema_path = directory / f"{name}.schema.json"
    with data_path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    schema_path.write_text(json.dumps({"target": target, "columns": kinds}), encoding="utf-8")
    return data_path, schema_path


# The six-row worked example for the meta-feature oracle. Expected values were
# computed independently with exact rational arithmetic (fractions for the
# proportions and variances, 40-digit logs for the entropies) and frozen here.

SIX_ROW_HEADER = ["c1", "x1", "c2", "x2", "label"]
SIX_ROW_KINDS = {"c1": "categorical", "x1": "numeric", "c2": "categorical", "x2": "numeric", "label": "categorical"}
SIX_ROW_ROWS = [
    ("a", 1.0, "u", 2.0, "yes"),
    ("a", 2.0, "v", 2.0, "yes"),
    ("b", 3.0, "w", 4.0, "no"),
    ("a", 4.0, "u", 4.0, "yes"),
    ("b", 5.0, "v", 9.0, "no"),
    ("a", 6.0, "u", 3.0, "no"),
]

SIX_ROW_EXPECTED = {
    "f1": 2.0,
    "f2": 1.0,
    "f3": 0.5,
    "f4": 0.5,
    "f5": 2.0,
    "f6": 2.0,
    "f7": 0.5,
    "f8": 4.0,
    "f9": 6.0,
    "f10": 2.0,
    "f11": 0.9182958340544896,
    "f12": 0.6666666666666666,
    "f13": 0.3333333333333333,
    "f14": 3.0,
    "f15": 1.4591479170272448,
    "f16": 0.5,
    "f17": 0.16666666666666666,
    "f18": 3.5,
    "f19": 4.0,
    "f20": 2.9166666666666665,
    "f21": 5.666666666666667,
    "f22": 0.0625,
    "f23": 1.890625,
}


def write_six_row_dataset(directory: Path) -> tuple[Path, Path]:
    return write_dataset(directory, "sixrow", SIX_ROW_HEADER, SIX_ROW_KINDS, "label", SIX_ROW_ROWS)


def random_dataset(rng: np.random.Generator, name: str = "random"):
    """A random in-memory Dataset for property tests."""
    from cashforge.meta_features import Dataset

    n_classes = int(rng.integers(2, 5))
    n_numeric = int(rng.integers(0, 4))
    n_categorical = int(rng.integers(0, 3))
    m = int(rng.integers(8, 30))
    attributes = []
    for i in range(n_numeric):
        attributes.append((f"x{i}", "numeric"))
    for i in range(n_categorical):
        attributes.append((f"c{i}", "categorical"))
    attributes.append(("label", "categorical"))
    rows = []
    for r in range(m):
        row: list = [float(rng.normal()) for _ in range(n_numeric)]
        row += [f"v{int(rng.integers(0, int(rng.integers(2, 5))))}" for _ in range(n_categorical)]
        row.append(f"class{r % n_classes}")
        rows.append(tuple(row))
    return Dataset(name=name, attributes=tuple(attributes), target_index=len(attributes) - 1, rows=tuple(rows))


# --- gradient-check helpers --------------------------------------------------


def draw_smooth_batch(model, rng: np.random.Generator, batch: int):
    """A random input batch keeping every relu pre-activation away from its
    kink, so central finite differences estimate a true derivative."""
    for _ in range(200):
        x = rng.normal(size=(batch, model.input_dim))
        if model.config.activation != "relu":
            return x
        a = x
        clear = True
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            z = a @ w + b
            if i < len(model.weights) - 1:
                if np.abs(z).min() < 1e-3:
                    clear = False
                    break
                a = np.maximum(z, 0.0)
        if clear:
            return x
    raise AssertionError("could not find a kink-free batch")


def finite_difference_worst_error(model, x, y, h=1e-5):
    from cashforge import neural_net as nn

    grads = nn.gradient(model, x, y)
    worst = 0.0
    for layer, (dw, db) in enumerate(grads):
        for params, analytic in ((model.weights[layer], dw), (model.biases[layer], db)):
            it = np.nditer(params, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                saved = params[ix]
                params[ix] = saved + h
                up = nn.loss(model, x, y)
                params[ix] = saved - h
                down = nn.loss(model, x, y)
                params[ix] = saved
                numeric = (up - down) / (2 * h)
                denom = max(abs(numeric), abs(analytic[ix]), 1e-8)
                worst = max(worst, abs(numeric - analytic[ix]) / denom)
    return worst


# --- the synthetic corpus with a planted (f1, f7) rule ----------------------

ALIASES = {
    "RandomForest": "random_forest",
    "RotationForest": "random_forest",
    "J48": "decision_tree",
    "SimpleCart": "decision_tree",
    "IBk": "knn",
    "KStar": "knn",
    "NaiveBayes": "gaussian_nb",
    "NaiveBayesSimple": "gaussian_nb",
    "BayesNet": "categorical_nb",
    "AODE": "categorical_nb",
    "Logistic": "logistic",
    "SMO": "logistic",
}

_FOREIGN_BY_CANONICAL: dict[str, list[str]] = {}
for foreign, canonical in ALIASES.items():
    _FOREIGN_BY_CANONICAL.setdefault(canonical, []).append(foreign)

PORTFOLIO_NAMES = ("knn", "gaussian_nb", "categorical_nb", "decision_tree", "random_forest", "logistic")

# (numeric, categorical) column counts, chosen to keep f7 well away from the
# planted 0.7 threshold.
_LOW_F7_SHAPES = [(1, 4), (1, 3), (2, 4)]
_HIGH_F7_SHAPES = [(3, 1), (4, 1), (4, 0)]


def planted_optimal(f1: float, f7: float) -> str:
    return "random_forest" if (f1 >= 4 or f7 >= 0.7) else "decision_tree"


def make_instance_dataset(directory: Path, name: str, rng: np.random.Generator, rows: int = 48):
    """Write one synthetic dataset; returns (data, schema, planted algorithm)."""
    n_classes = int(rng.choice([2, 3])) if rng.random() < 0.65 else int(rng.choice([4, 5]))
    n_numeric, n_categorical = (
        _HIGH_F7_SHAPES[int(rng.integers(len(_HIGH_F7_SHAPES)))]
        if rng.random() < 0.35
        else _LOW_F7_SHAPES[int(rng.integers(len(_LOW_F7_SHAPES)))]
    )
    header = [f"x{i}" for i in range(n_numeric)] + [f"c{i}" for i in range(n_categorical)] + ["label"]
    kinds = {f"x{i}": "numeric" for i in range(n_numeric)}
    kinds.update({f"c{i}": "categorical" for i in range(n_categorical)})
    kinds["label"] = "categorical"

    table = []
    for r in range(rows):
        cls = r % n_classes
        row: list = [round(float(rng.normal(loc=1.5 * cls, scale=1.0)), 6) for _ in range(n_numeric)]
        row += [f"v{(cls + int(rng.integers(0, 2))) % 3}" for _ in range(n_categorical)]
        row.append(f"class{cls}")
        table.append(tuple(row))
    data_path, schema_path = write_dataset(directory, name, header, kinds, "label", table)
    f7 = n_numeric / (n_numeric + n_categorical)
    return data_path, schema_path, planted_optimal(n_classes, f7)


def build_corpus(directory: Path, seed: int, n_train: int = 40, n_test: int = 12, rows: int = 48):
    """Write datasets, registry, aliases and experiences under ``directory``.

    Returns (experience_path, registry_path, alias_path, test_instances) where
    test_instances is a list of (data_path, schema_path, planted algorithm).
    """
    rng = np.random.default_rng(seed)
    data_dir = directory / "data"
    data_dir.mkdir(parents=True, exist_ok=True)

    papers = [
        {
            "kind": "paper",
            "paper_id": f"P{i:02d}",
            "level": "ABCD"[i % 4],
            "venue_type": "Journal" if i % 2 == 0 else "Conference",
            "impact_factor": round(0.5 + 0.7 * i, 2),
            "avg_annual_citations": 10 * i + 3,
        }
        for i in range(10)
    ]
    paper_rank = sorted(
        papers, key=lambda p: ({"D": 0, "C": 1, "B": 2, "A": 3}[p["level"]], p["venue_type"] == "Journal",
                               p["impact_factor"], p["avg_annual_citations"], p["paper_id"])
    )
    lower_half = [p["paper_id"] for p in paper_rank[:5]]
    upper_half = [p["paper_id"] for p in paper_rank[5:]]

    registry = {"instances": {}}
    experiences = []
    for i in range(n_train):
        name = f"inst-{i:03d}"
        _, _, optimal = make_instance_dataset(data_dir, name, rng, rows=rows)
        registry["instances"][name] = {"data": f"data/{name}.csv", "schema": f"data/{name}.schema.json"}

        best_foreign = str(rng.choice(_FOREIGN_BY_CANONICAL[optimal]))
        losers = [
            str(rng.choice(_FOREIGN_BY_CANONICAL[c])) for c in PORTFOLIO_NAMES if c != optimal
        ]
        experiences.append(
            {
                "kind": "experience",
                "paper_id": str(rng.choice(upper_half)),
                "instance_id": name,
                "best_algorithm": best_foreign,
                "other_algorithms": losers,
            }
        )
        if rng.random() < 0.3:
            # A second, less reliable record whose winner contradicts the first;
            # conflict resolution must keep the planted optimum on top.
            rival_canonical = str(rng.choice([c for c in PORTFOLIO_NAMES if c != optimal]))
            rival = str(rng.choice(_FOREIGN_BY_CANONICAL[rival_canonical]))
            experiences.append(
                {
                    "kind": "experience",
                    "paper_id": str(rng.choice(lower_half)),
                    "instance_id": name,
                    "best_algorithm": rival,
                    "other_algorithms": [best_foreign],
                }
            )

    experience_path = directory / "experiences.jsonl"
    with experience_path.open("w", encoding="utf-8") as fh:
        for line in papers + experiences:
            fh.write(json.dumps(line) + "\n")

    registry_path = directory / "registry.json"
    registry_path.write_text(json.dumps(registry, indent=1), encoding="utf-8")

    alias_path = directory / "aliases.json"
    alias_path.write_text(json.dumps(ALIASES), encoding="utf-8")

    test_instances = []
    for i in range(n_test):
        name = f"test-{i:03d}"
        data_path, schema_path, optimal = make_instance_dataset(data_dir, name, rng, rows=rows)
        test_instances.append((data_path, schema_path, optimal))

    return experience_path, registry_path, alias_path, test_instances
