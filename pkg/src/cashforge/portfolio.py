"""Built-in classifier portfolio with search spaces and evaluation metrics.

Six algorithm families stand in for the large library the experience corpus
talks about: k-nearest-neighbors, Gaussian and categorical naive Bayes, a
CART decision tree, a random forest, and one-vs-rest logistic regression.
Each carries capability flags (some families only accept numeric or only
categorical attributes) and a typed hyperparameter search space whose
log-scaled dimensions are expressed in log10 units.

Scoring is seeded stratified k-fold cross-validation accuracy. Rows are
canonically sorted before the seeded shuffle so fold assignment is invariant
under input row permutation. The portfolio-level metrics follow the
performance-over-ratio definition: an algorithm's ratio is the fraction of
portfolio members whose tuned accuracy does not exceed its own, where members
that cannot process the dataset count in the denominator with performance 0.
"""

from __future__ import annotations

import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import LogisticRegression
from sklearn.multiclass import OneVsRestClassifier
from sklearn.naive_bayes import CategoricalNB, GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.tree import DecisionTreeClassifier

from .errors import CapabilityError, InputError
from .hpo_engine import Configuration, SearchSpace, categorical, ga_optimize, integer, real
from .meta_features import CATEGORICAL, NUMERIC, Dataset
from .seeding import derive_seed

DEFAULT_TUNING_TIME_LIMIT = 1000.0  # seconds per algorithm


class Predictor(Protocol):
    def predict(self, feature_rows: Sequence[tuple]) -> list[str]: ...


@dataclass(frozen=True)
class Capabilities:
    handles_numeric: bool = True
    handles_categorical: bool = True
    handles_multiclass: bool = True


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    search_space: SearchSpace
    capabilities: Capabilities
    trainer: Callable[[Dataset, Configuration, int], Predictor]


@dataclass(frozen=True)
class PerformanceScore:
    algorithm: str
    dataset: str
    accuracy: float
    configuration: Configuration

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")


def admits(spec: AlgorithmSpec, dataset: Dataset) -> bool:
    numeric, cat = dataset.numeric_indices(), dataset.categorical_indices()
    if not spec.capabilities.handles_categorical and cat:
        return False
    if not spec.capabilities.handles_numeric and numeric:
        return False
    if not spec.capabilities.handles_multiclass and dataset.class_count() > 2:
        return False
    usable = (len(numeric) if spec.capabilities.handles_numeric else 0) + (
        len(cat) if spec.capabilities.handles_categorical else 0
    )
    return usable >= 1


def ensure_admissible(spec: AlgorithmSpec, dataset: Dataset) -> None:
    if not admits(spec, dataset):
        raise CapabilityError(f"algorithm {spec.name!r} cannot process dataset {dataset.name!r}")


def feature_rows(dataset: Dataset) -> list[tuple]:
    common = dataset.common_indices()
    return [tuple(row[i] for i in common) for row in dataset.rows]


# --- feature codecs -------------------------------------------------------
# Trainers see rows of common-attribute values in column order. Vocabularies
# for categorical columns are fit on the training rows; unseen test values
# map to an extra "other" index (ordinal) or to all-zeros (one-hot).


class _NumericCodec:
    def __init__(self, kinds: Sequence[str]):
        self.numeric_pos = [i for i, k in enumerate(kinds) if k == NUMERIC]

    def fit(self, rows: Sequence[tuple]) -> "_NumericCodec":
        return self

    def transform(self, rows: Sequence[tuple]) -> np.ndarray:
        return np.asarray([[row[i] for i in self.numeric_pos] for row in rows], dtype=float)


class _OrdinalCodec:
    def __init__(self, kinds: Sequence[str]):
        self.cat_pos = [i for i, k in enumerate(kinds) if k == CATEGORICAL]
        self.vocab: list[dict[str, int]] = []

    def fit(self, rows: Sequence[tuple]) -> "_OrdinalCodec":
        self.vocab = []
        for pos in self.cat_pos:
            values = sorted({row[pos] for row in rows})
            self.vocab.append({v: i for i, v in enumerate(values)})
        return self

    def transform(self, rows: Sequence[tuple]) -> np.ndarray:
        out = np.zeros((len(rows), len(self.cat_pos)), dtype=int)
        for j, (pos, vocab) in enumerate(zip(self.cat_pos, self.vocab)):
            unseen = len(vocab)
            for i, row in enumerate(rows):
                out[i, j] = vocab.get(row[pos], unseen)
        return out

    def category_counts(self) -> list[int]:
        # +1 reserves the unseen bucket so test folds never index out of range
        return [len(v) + 1 for v in self.vocab]


class _MixedCodec:
    """Numeric columns as-is, categorical columns one-hot."""

    def __init__(self, kinds: Sequence[str]):
        self.kinds = list(kinds)
        self.numeric = _NumericCodec(kinds)
        self.cat_pos = [i for i, k in enumerate(kinds) if k == CATEGORICAL]
        self.vocab: list[list[str]] = []

    def fit(self, rows: Sequence[tuple]) -> "_MixedCodec":
        self.vocab = [sorted({row[pos] for row in rows}) for pos in self.cat_pos]
        return self

    def transform(self, rows: Sequence[tuple]) -> np.ndarray:
        blocks = []
        if self.numeric.numeric_pos:
            blocks.append(self.numeric.transform(rows))
        for pos, values in zip(self.cat_pos, self.vocab):
            index = {v: i for i, v in enumerate(values)}
            block = np.zeros((len(rows), len(values)))
            for i, row in enumerate(rows):
                j = index.get(row[pos])
                if j is not None:
                    block[i, j] = 1.0
            blocks.append(block)
        return np.hstack(blocks) if blocks else np.zeros((len(rows), 0))


class _SklearnPredictor:
    def __init__(self, codec, model, scaler=None):
        self.codec = codec
        self.model = model
        self.scaler = scaler

    def predict(self, rows: Sequence[tuple]) -> list[str]:
        x = self.codec.transform(rows)
        if self.scaler is not None:
            x = self.scaler.transform(x)
        return [str(label) for label in self.model.predict(x)]


def _kinds(dataset: Dataset) -> list[str]:
    return [dataset.attributes[i][1] for i in dataset.common_indices()]


def _train_knn(dataset: Dataset, config: Configuration, seed: int) -> Predictor:
    rows, labels = feature_rows(dataset), dataset.labels()
    codec = _NumericCodec(_kinds(dataset)).fit(rows)
    model = KNeighborsClassifier(
        n_neighbors=min(int(config["k"]), len(rows)),
        metric=config["distance"],
    )
    model.fit(codec.transform(rows), labels)
    return _SklearnPredictor(codec, model)


def _train_gaussian_nb(dataset: Dataset, config: Configuration, seed: int) -> Predictor:
    rows, labels = feature_rows(dataset), dataset.labels()
    codec = _NumericCodec(_kinds(dataset)).fit(rows)
    model = GaussianNB(var_smoothing=10.0 ** config["log10_var_smoothing"])
    model.fit(codec.transform(rows), labels)
    return _SklearnPredictor(codec, model)


def _train_categorical_nb(dataset: Dataset, config: Configuration, seed: int) -> Predictor:
    rows, labels = feature_rows(dataset), dataset.labels()
    codec = _OrdinalCodec(_kinds(dataset)).fit(rows)
    model = CategoricalNB(alpha=config["alpha"], min_categories=np.asarray(codec.category_counts()))
    model.fit(codec.transform(rows), labels)
    return _SklearnPredictor(codec, model)


def _train_decision_tree(dataset: Dataset, config: Configuration, seed: int) -> Predictor:
    rows, labels = feature_rows(dataset), dataset.labels()
    codec = _MixedCodec(_kinds(dataset)).fit(rows)
    model = DecisionTreeClassifier(
        max_depth=int(config["max_depth"]),
        min_samples_split=int(config["min_samples_split"]),
        random_state=seed % (2**32),
    )
    model.fit(codec.transform(rows), labels)
    return _SklearnPredictor(codec, model)


def _train_random_forest(dataset: Dataset, config: Configuration, seed: int) -> Predictor:
    rows, labels = feature_rows(dataset), dataset.labels()
    codec = _MixedCodec(_kinds(dataset)).fit(rows)
    subsample = {"sqrt": "sqrt", "log2": "log2", "all": None}[config["feature_subsample"]]
    model = RandomForestClassifier(
        n_estimators=int(config["trees"]),
        max_depth=int(config["max_depth"]),
        max_features=subsample,
        random_state=seed % (2**32),
    )
    model.fit(codec.transform(rows), labels)
    return _SklearnPredictor(codec, model)


def _train_logistic(dataset: Dataset, config: Configuration, seed: int) -> Predictor:
    from sklearn.preprocessing import StandardScaler

    rows, labels = feature_rows(dataset), dataset.labels()
    codec = _NumericCodec(_kinds(dataset)).fit(rows)
    x = codec.transform(rows)
    scaler = StandardScaler().fit(x)
    model = OneVsRestClassifier(
        LogisticRegression(
            C=1.0 / (10.0 ** config["log10_l2_strength"]),
            max_iter=int(config["iterations"]),
            solver="lbfgs",
        )
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model.fit(scaler.transform(x), labels)
    return _SklearnPredictor(codec, model, scaler=scaler)


def builtin_portfolio() -> list[AlgorithmSpec]:
    """The six built-in algorithm families, in canonical order."""
    return [
        AlgorithmSpec(
            name="knn",
            search_space=SearchSpace(
                (integer("k", 1, 25), categorical("distance", ("euclidean", "manhattan")))
            ),
            capabilities=Capabilities(handles_categorical=False),
            trainer=_train_knn,
        ),
        AlgorithmSpec(
            name="gaussian_nb",
            search_space=SearchSpace((real("log10_var_smoothing", -12.0, -3.0),)),
            capabilities=Capabilities(handles_categorical=False),
            trainer=_train_gaussian_nb,
        ),
        AlgorithmSpec(
            name="categorical_nb",
            search_space=SearchSpace((real("alpha", 0.01, 10.0),)),
            capabilities=Capabilities(handles_numeric=False),
            trainer=_train_categorical_nb,
        ),
        AlgorithmSpec(
            name="decision_tree",
            search_space=SearchSpace(
                (integer("max_depth", 1, 30), integer("min_samples_split", 2, 20))
            ),
            capabilities=Capabilities(),
            trainer=_train_decision_tree,
        ),
        AlgorithmSpec(
            name="random_forest",
            search_space=SearchSpace(
                (
                    integer("trees", 10, 200),
                    integer("max_depth", 1, 30),
                    categorical("feature_subsample", ("sqrt", "log2", "all")),
                )
            ),
            capabilities=Capabilities(),
            trainer=_train_random_forest,
        ),
        AlgorithmSpec(
            name="logistic",
            search_space=SearchSpace(
                (real("log10_l2_strength", -4.0, 2.0), integer("iterations", 50, 500))
            ),
            capabilities=Capabilities(handles_categorical=False),
            trainer=_train_logistic,
        ),
    ]


def portfolio_by_name(portfolio: Sequence[AlgorithmSpec] | None = None) -> dict[str, AlgorithmSpec]:
    return {spec.name: spec for spec in (portfolio if portfolio is not None else builtin_portfolio())}


# --- cross-validation -----------------------------------------------------


def stratified_fold_indices(labels: Sequence[str], k: int, seed: int) -> list[np.ndarray]:
    """Seeded stratified folds over canonically sorted labels.

    The caller is responsible for canonicalizing the row order first when
    permutation invariance matters; this helper only shuffles and stratifies.
    """
    labels = list(labels)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(labels))
    folds: list[list[int]] = [[] for _ in range(k)]
    counter = 0
    for cls in sorted(set(labels)):
        for idx in perm:
            if labels[idx] == cls:
                folds[counter % k].append(int(idx))
                counter += 1
    return [np.asarray(f, dtype=int) for f in folds]


def _canonical_order(dataset: Dataset) -> list[int]:
    keys = [tuple(repr(v) for v in row) for row in dataset.rows]
    return sorted(range(len(keys)), key=lambda i: (keys[i], i))


def _subset(dataset: Dataset, indices: Sequence[int], suffix: str) -> Dataset:
    return Dataset(
        name=f"{dataset.name}#{suffix}",
        attributes=dataset.attributes,
        target_index=dataset.target_index,
        rows=tuple(dataset.rows[i] for i in indices),
    )


def effective_fold_count(dataset: Dataset, k: int) -> int:
    min_class = min(Counter(dataset.labels()).values())
    k_eff = min(k, min_class)
    if k_eff < 2:
        raise InputError(
            f"dataset {dataset.name!r}: smallest class has {min_class} rows, cannot stratify 2 folds"
        )
    return k_eff


def cross_val_score(
    spec: AlgorithmSpec,
    dataset: Dataset,
    configuration: Configuration,
    k: int = 10,
    seed: int = 0,
) -> PerformanceScore:
    """Mean stratified k-fold accuracy; k shrinks to the smallest class count.

    Rows are sorted canonically before the seeded shuffle, so the score is
    invariant under permutation of the input rows.
    """
    ensure_admissible(spec, dataset)
    configuration = spec.search_space.validate(configuration)
    k_eff = effective_fold_count(dataset, k)

    order = _canonical_order(dataset)
    labels = dataset.labels()
    ordered_labels = [labels[i] for i in order]
    folds = stratified_fold_indices(ordered_labels, k_eff, seed)

    rows = feature_rows(dataset)
    accuracies = []
    for fold_no, test_pos in enumerate(folds):
        test_idx = [order[p] for p in test_pos]
        train_idx = [order[p] for f, fold in enumerate(folds) if f != fold_no for p in fold]
        train_ds = _subset(dataset, train_idx, f"train{fold_no}")
        predictor = spec.trainer(train_ds, configuration, seed)
        predictions = predictor.predict([rows[i] for i in test_idx])
        actual = [labels[i] for i in test_idx]
        accuracies.append(
            sum(1 for p, a in zip(predictions, actual) if p == a) / len(test_idx)
        )
    return PerformanceScore(
        algorithm=spec.name,
        dataset=dataset.name,
        accuracy=float(np.mean(accuracies)),
        configuration=configuration,
    )


# --- tuned performance and the portfolio metrics --------------------------


def tuned_performance(
    spec: AlgorithmSpec,
    dataset: Dataset,
    seed: int = 0,
    k: int = 10,
    time_limit: float = DEFAULT_TUNING_TIME_LIMIT,
    population_size: int = 50,
    max_generations: int = 100,
) -> PerformanceScore:
    """GA-tuned cross-validation accuracy, never worse than the default
    configuration (which is injected into the initial population)."""
    ensure_admissible(spec, dataset)

    def objective(config: Configuration) -> float:
        return cross_val_score(spec, dataset, config, k=k, seed=seed).accuracy

    result = ga_optimize(
        spec.search_space,
        objective,
        population_size=population_size,
        max_generations=max_generations,
        time_limit=time_limit,
        seed=derive_seed(seed, f"tune:{spec.name}:{dataset.name}"),
        initial_configurations=[spec.search_space.default_configuration()],
    )
    return PerformanceScore(
        algorithm=spec.name,
        dataset=dataset.name,
        accuracy=result.best_score,
        configuration=result.best_configuration,
    )


def portfolio_performances(
    dataset: Dataset,
    portfolio: Sequence[AlgorithmSpec] | None = None,
    seed: int = 0,
    k: int = 10,
    time_limit: float = DEFAULT_TUNING_TIME_LIMIT,
    population_size: int = 50,
    max_generations: int = 100,
    threads: int = 1,
) -> dict[str, PerformanceScore | None]:
    """Tuned performance per member; None marks members that cannot process
    the dataset. Members tune independently, so the result does not depend on
    worker count."""
    portfolio = list(portfolio) if portfolio is not None else builtin_portfolio()

    def run(spec: AlgorithmSpec) -> PerformanceScore | None:
        if not admits(spec, dataset):
            return None
        return tuned_performance(
            spec,
            dataset,
            seed=seed,
            k=k,
            time_limit=time_limit,
            population_size=population_size,
            max_generations=max_generations,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, portfolio))
    else:
        results = [run(spec) for spec in portfolio]
    return {spec.name: score for spec, score in zip(portfolio, results)}


def poratio_from_scores(scores: Mapping[str, float | None], algorithm: str) -> float:
    """Fraction of members whose performance does not exceed the algorithm's.

    Members that cannot process the dataset (score None) are treated as
    performance 0 and stay in the denominator.
    """
    if algorithm not in scores:
        raise InputError(f"algorithm {algorithm!r} not in the portfolio")
    own = scores[algorithm] if scores[algorithm] is not None else 0.0
    not_better = sum(1 for s in scores.values() if (s if s is not None else 0.0) <= own)
    return not_better / len(scores)


def pmax_pavg_from_scores(scores: Mapping[str, float | None]) -> tuple[float, float]:
    """Best and mean performance over the members that can process the dataset."""
    applicable = [s for s in scores.values() if s is not None]
    if not applicable:
        raise InputError("no portfolio member can process this dataset")
    return max(applicable), float(np.mean(applicable))


def poratio(
    algorithm: str,
    dataset: Dataset,
    portfolio: Sequence[AlgorithmSpec] | None = None,
    tuning_budget: float = DEFAULT_TUNING_TIME_LIMIT,
    seed: int = 0,
    k: int = 10,
    **tuning_kwargs,
) -> float:
    performances = portfolio_performances(
        dataset, portfolio, seed=seed, k=k, time_limit=tuning_budget, **tuning_kwargs
    )
    scores = {name: (p.accuracy if p is not None else None) for name, p in performances.items()}
    return poratio_from_scores(scores, algorithm)


def pmax_pavg(
    dataset: Dataset,
    portfolio: Sequence[AlgorithmSpec] | None = None,
    tuning_budget: float = DEFAULT_TUNING_TIME_LIMIT,
    seed: int = 0,
    k: int = 10,
    **tuning_kwargs,
) -> tuple[float, float]:
    performances = portfolio_performances(
        dataset, portfolio, seed=seed, k=k, time_limit=tuning_budget, **tuning_kwargs
    )
    scores = {name: (p.accuracy if p is not None else None) for name, p in performances.items()}
    return pmax_pavg_from_scores(scores)
