"""Offline decision-model training and online recommend-and-tune.

The offline path (``run_dmd``) acquires knowledge pairs from an experience
file, materializes each instance through the dataset registry, GA-selects the
meta-features worth keeping, GA-searches an MLP architecture against masked
regression targets, and trains the final decision model. The online path
(``recommend`` / ``run_udr``) maps a new dataset's meta-features through the
model, masks algorithms whose capabilities reject the dataset, and tunes the
winner's hyperparameters with the backend chosen by a timed probe.

Masked targets encode one knowledge pair as a vector over the portfolio:
1 at the optimal algorithm, -1 at algorithms that cannot process the
instance, 0 elsewhere. Pairs whose optimal algorithm is itself incapable (or
absent from the portfolio after aliasing) are dropped with a warning.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .config import RunConfig
from .errors import CapabilityError, InputError, StageError
from .experience_store import load_experiences
from .hpo_engine import (
    Configuration,
    SearchSpace,
    bo_optimize,
    boolean,
    backend_for_probe,
    categorical,
    ga_optimize,
    integer,
    probe_objective,
    real,
)
from .hpo_engine.backend import GA
from .knowledge_graph import KnowledgePair, acquire_knowledge
from .meta_features import FEATURE_NAMES, Dataset, extract, load_dataset
from . import neural_net as nn
from .portfolio import (
    AlgorithmSpec,
    admits,
    builtin_portfolio,
    cross_val_score,
    portfolio_by_name,
    stratified_fold_indices,
)
from .seeding import derive_seed

log = logging.getLogger(__name__)

# Fitness model for feature selection: an MLP classifier with this fixed
# default architecture scores each candidate feature subset.
FITNESS_CLASSIFIER_CONFIG = nn.MlpConfig(
    hidden_layers=1,
    hidden_layer_size=32,
    activation="relu",
    solver="adam",
    max_iter=200,
    validation_fraction=0.1,
    beta1=0.9,
    beta2=0.9,
)

ARCHITECTURE_PRECISION = -0.0015
UNBOUNDED_EVALUATIONS = 10**6


def mlp_search_space() -> SearchSpace:
    """The ten-dimensional MLP architecture space (sgd/adam solvers)."""
    return SearchSpace(
        (
            integer("hidden_layers", 1, 20),
            integer("hidden_layer_size", 5, 100),
            categorical("activation", nn.ACTIVATIONS),
            categorical("solver", nn.SOLVERS),
            categorical("learning_rate_schedule", nn.SCHEDULES),
            integer("max_iter", 100, 500),
            real("momentum", 0.01, 0.99),
            real("validation_fraction", 0.01, 0.99),
            real("beta1", 0.01, 0.99),
            real("beta2", 0.01, 0.99),
        )
    )


# --- dataset registry -----------------------------------------------------


def load_registry(path: str | Path) -> dict[str, tuple[Path, Path]]:
    """Map instance ids to (data, schema) paths, resolved relative to the
    registry file's directory."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        raw = json.load(fh)
    instances = raw.get("instances")
    if not isinstance(instances, dict):
        raise InputError(f"{path}: registry must contain an 'instances' object")
    base = path.parent
    registry = {}
    for instance_id, entry in instances.items():
        if not isinstance(entry, dict) or "data" not in entry or "schema" not in entry:
            raise InputError(f"{path}: instance {instance_id!r} needs 'data' and 'schema' paths")
        registry[instance_id] = (base / entry["data"], base / entry["schema"])
    return registry


# --- knowledge table ------------------------------------------------------


def masked_target(
    optimal: str, portfolio_names: Sequence[str], admissible: Sequence[bool]
) -> np.ndarray | None:
    """1 at the optimal index, -1 where the instance is rejected, 0 elsewhere.

    Returns None when the optimal algorithm is absent or itself rejected;
    such pairs carry contradictory evidence and are dropped by the caller.
    """
    if optimal not in portfolio_names:
        return None
    target = np.zeros(len(portfolio_names))
    for i, ok in enumerate(admissible):
        if not ok:
            target[i] = -1.0
    idx = list(portfolio_names).index(optimal)
    if target[idx] == -1.0:
        return None
    target[idx] = 1.0
    return target


@dataclass(frozen=True)
class KnowledgeTable:
    """Feature matrix, optimal labels and masked targets for training."""

    instance_ids: tuple[str, ...]
    features: np.ndarray          # (t, 23)
    optimal: tuple[str, ...]
    targets: np.ndarray           # (t, n_algorithms) over {-1, 0, 1}
    portfolio_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.instance_ids)


def build_knowledge_table(
    pairs: Sequence[KnowledgePair],
    registry: Mapping[str, tuple[Path, Path]],
    portfolio: Sequence[AlgorithmSpec] | None = None,
) -> KnowledgeTable:
    """Materialize knowledge pairs into features and masked targets."""
    portfolio = list(portfolio) if portfolio is not None else builtin_portfolio()
    names = tuple(spec.name for spec in portfolio)
    ids, rows, labels, targets = [], [], [], []
    for pair in pairs:
        if pair.instance_id not in registry:
            raise InputError(f"instance {pair.instance_id!r} missing from the dataset registry")
        data_path, schema_path = registry[pair.instance_id]
        dataset = load_dataset(data_path, schema_path)
        admissible = [admits(spec, dataset) for spec in portfolio]
        target = masked_target(pair.optimal_algorithm, names, admissible)
        if target is None:
            log.warning(
                "dropping knowledge pair (%s, %s): algorithm unknown to the portfolio "
                "or incapable of the instance",
                pair.instance_id,
                pair.optimal_algorithm,
            )
            continue
        ids.append(pair.instance_id)
        rows.append(extract(dataset).as_array())
        labels.append(pair.optimal_algorithm)
        targets.append(target)
    if not ids:
        raise InputError("no usable knowledge pairs after portfolio mapping")
    return KnowledgeTable(
        instance_ids=tuple(ids),
        features=np.vstack(rows),
        optimal=tuple(labels),
        targets=np.vstack(targets),
        portfolio_names=names,
    )


# --- fitness helpers ------------------------------------------------------


def _standardize_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def _mlp_cv_accuracy(
    x: np.ndarray,
    labels: Sequence[str],
    folds: int,
    seed: int,
    config: nn.MlpConfig = FITNESS_CLASSIFIER_CONFIG,
    train_params: Mapping | None = None,
) -> float:
    classes = sorted(set(labels))
    y = np.asarray([classes.index(lab) for lab in labels])
    fold_sets = stratified_fold_indices(list(labels), folds, seed)
    params = dict(train_params or {})
    correct = []
    for fold_no, test_idx in enumerate(fold_sets):
        train_idx = np.asarray(
            [i for f, fold in enumerate(fold_sets) if f != fold_no for i in fold], dtype=int
        )
        mean, std = _standardize_fit(x[train_idx])
        model = nn.init(config, x.shape[1], len(classes), "classifier", seed=derive_seed(seed, f"fold{fold_no}"))
        nn.train(model, (x[train_idx] - mean) / std, y[train_idx], **params)
        pred = nn.predict(model, (x[test_idx] - mean) / std).argmax(axis=1)
        correct.append(float((pred == y[test_idx]).mean()))
    return float(np.mean(correct))


def _mlp_cv_mse(
    x: np.ndarray,
    targets: np.ndarray,
    strata: Sequence[str],
    folds: int,
    seed: int,
    config: nn.MlpConfig,
    train_params: Mapping | None = None,
) -> float:
    fold_sets = stratified_fold_indices(list(strata), folds, seed)
    params = dict(train_params or {})
    errors = []
    for fold_no, test_idx in enumerate(fold_sets):
        train_idx = np.asarray(
            [i for f, fold in enumerate(fold_sets) if f != fold_no for i in fold], dtype=int
        )
        mean, std = _standardize_fit(x[train_idx])
        model = nn.init(config, x.shape[1], targets.shape[1], "regressor", seed=derive_seed(seed, f"fold{fold_no}"))
        nn.train(model, (x[train_idx] - mean) / std, targets[train_idx], **params)
        pred = nn.predict(model, (x[test_idx] - mean) / std)
        errors.append(float(np.mean((pred - targets[test_idx]) ** 2)))
    return float(np.mean(errors))


def _check_knowledge(table: KnowledgeTable) -> None:
    if len(table) < 10:
        raise InputError(f"need at least 10 knowledge pairs, got {len(table)}")
    if len(set(table.optimal)) < 2:
        raise InputError(
            "knowledge names a single algorithm for every instance; "
            "broaden the experience corpus before training a decision model"
        )


# --- DMD stages -----------------------------------------------------------


def select_features(
    table: KnowledgeTable,
    candidates: Sequence[str] = FEATURE_NAMES,
    seed: int = 0,
    population_size: int = 50,
    max_generations: int = 100,
    folds: int = 5,
    classifier_config: nn.MlpConfig = FITNESS_CLASSIFIER_CONFIG,
    train_params: Mapping | None = None,
) -> tuple[str, ...]:
    """GA over boolean include/exclude genes, one per candidate feature.

    Fitness is the cross-validated accuracy of a fixed default MLP classifier
    on the column-masked feature matrix. All-false subsets score -inf, so the
    best configuration always keeps at least one feature.
    """
    _check_knowledge(table)
    candidates = tuple(candidates)
    unknown = [c for c in candidates if c not in FEATURE_NAMES]
    if unknown:
        raise InputError(f"unknown candidate features: {unknown}")
    columns = {name: FEATURE_NAMES.index(name) for name in candidates}
    space = SearchSpace(tuple(boolean(name) for name in candidates))
    fitness_seed = derive_seed(seed, "feature-fitness")

    def objective(config: Configuration) -> float:
        chosen = [name for name in candidates if config[name]]
        if not chosen:
            return -math.inf
        x = table.features[:, [columns[name] for name in chosen]]
        return _mlp_cv_accuracy(x, table.optimal, folds, fitness_seed, classifier_config, train_params)

    result = ga_optimize(
        space,
        objective,
        population_size=population_size,
        max_generations=max_generations,
        seed=derive_seed(seed, "feature-ga"),
        # keep-everything baseline: the search can only improve on it
        initial_configurations=[{name: True for name in candidates}],
    )
    return tuple(name for name in candidates if result.best_configuration[name])


def search_architecture(
    table: KnowledgeTable,
    selected_features: Sequence[str],
    precision: float = ARCHITECTURE_PRECISION,
    seed: int = 0,
    population_size: int = 50,
    max_generations: int = 100,
    folds: int = 5,
    train_params: Mapping | None = None,
) -> nn.MlpConfig:
    """GA over the MLP hyperparameter space against masked regression targets.

    Fitness is the negated cross-validated MSE; the search stops early once a
    configuration reaches fitness >= ``precision`` (i.e. MSE <= -precision)
    and otherwise returns the best configuration at the generation cap.
    """
    config, _ = _search_architecture_scored(
        table, selected_features, precision, seed, population_size, max_generations, folds, train_params
    )
    return config


def _search_architecture_scored(
    table: KnowledgeTable,
    selected_features: Sequence[str],
    precision: float,
    seed: int,
    population_size: int,
    max_generations: int,
    folds: int,
    train_params: Mapping | None,
) -> tuple[nn.MlpConfig, float]:
    _check_knowledge(table)
    columns = [FEATURE_NAMES.index(name) for name in selected_features]
    if not columns:
        raise InputError("selected_features must be non-empty")
    x = table.features[:, columns]
    fitness_seed = derive_seed(seed, "architecture-fitness")

    def objective(config: Configuration) -> float:
        mlp_config = nn.MlpConfig(**config)
        return -_mlp_cv_mse(x, table.targets, table.optimal, folds, fitness_seed, mlp_config, train_params)

    result = ga_optimize(
        mlp_search_space(),
        objective,
        population_size=population_size,
        max_generations=max_generations,
        stop_score=precision,
        seed=derive_seed(seed, "architecture-ga"),
        # the stock architecture seeds the population so the search never
        # settles on something worse than it
        initial_configurations=[asdict(nn.MlpConfig())],
    )
    return nn.MlpConfig(**result.best_configuration).validate(), -result.best_score


@dataclass
class DecisionModel:
    """Trained algorithm-selection model plus everything needed to apply it."""

    selected_features: tuple[str, ...]
    feature_means: np.ndarray
    feature_stds: np.ndarray
    mlp: nn.MlpModel
    portfolio_names: tuple[str, ...]
    provenance: dict = field(default_factory=dict)

    def standardize(self, values: np.ndarray) -> np.ndarray:
        return (values - self.feature_means) / self.feature_stds

    def scores_for(self, dataset: Dataset) -> np.ndarray:
        vector = extract(dataset)
        x = np.asarray([vector[name] for name in self.selected_features])
        return nn.predict(self.mlp, self.standardize(x))


def train_decision_model(
    table: KnowledgeTable,
    selected_features: Sequence[str],
    config: nn.MlpConfig,
    seed: int = 0,
    train_params: Mapping | None = None,
    restarts: int = 3,
) -> DecisionModel:
    """Standardize the selected feature columns, train the final regressor on
    the masked targets, and record provenance.

    Zero-variance features are dropped from the selection before training.
    Training runs ``restarts`` times from derived seeds and keeps the run with
    the lowest validation loss: deep configurations are sensitive to their
    starting point and a single unlucky run would otherwise sink the model.
    """
    _check_knowledge(table)
    if restarts < 1:
        raise InputError("restarts must be >= 1")
    selected = [name for name in selected_features]
    columns = [FEATURE_NAMES.index(name) for name in selected]
    x = table.features[:, columns]
    stds = x.std(axis=0)
    dropped = [name for name, s in zip(selected, stds) if not s > 0]
    if dropped:
        log.warning("dropping zero-variance features from the selection: %s", dropped)
        keep = [i for i, s in enumerate(stds) if s > 0]
        if not keep:
            raise InputError("every selected feature has zero variance over the knowledge set")
        selected = [selected[i] for i in keep]
        columns = [columns[i] for i in keep]
        x = table.features[:, columns]
    mean, std = x.mean(axis=0), x.std(axis=0)
    standardized = (x - mean) / std

    best_model, losses = None, []
    for attempt in range(restarts):
        model = nn.init(
            config,
            len(selected),
            len(table.portfolio_names),
            "regressor",
            seed=derive_seed(seed, f"decision-train-{attempt}"),
        )
        model, val_loss = nn.train(model, standardized, table.targets, **dict(train_params or {}))
        losses.append(val_loss)
        if best_model is None or val_loss < min(losses[:-1]):
            best_model = model
    full_mse = float(np.mean((nn.predict(best_model, standardized) - table.targets) ** 2))
    return DecisionModel(
        selected_features=tuple(selected),
        feature_means=mean,
        feature_stds=std,
        mlp=best_model,
        portfolio_names=table.portfolio_names,
        provenance={
            "knowledge_size": len(table),
            "seed": seed,
            "validation_loss": min(losses),
            "restart_validation_losses": losses,
            "full_set_mse": full_mse,
            "dropped_zero_variance": dropped,
        },
    )


def save_model(model: DecisionModel, path: str | Path) -> None:
    payload = {
        "selected_features": list(model.selected_features),
        "standardization": {
            "means": model.feature_means.tolist(),
            "stds": model.feature_stds.tolist(),
        },
        "mlp": nn.model_to_dict(model.mlp),
        "portfolio_names": list(model.portfolio_names),
        "provenance": model.provenance,
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> DecisionModel:
    with Path(path).open("r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return DecisionModel(
            selected_features=tuple(payload["selected_features"]),
            feature_means=np.asarray(payload["standardization"]["means"], dtype=float),
            feature_stds=np.asarray(payload["standardization"]["stds"], dtype=float),
            mlp=nn.model_from_dict(payload["mlp"]),
            portfolio_names=tuple(payload["portfolio_names"]),
            provenance=dict(payload.get("provenance", {})),
        )
    except KeyError as exc:
        raise InputError(f"{path}: model file missing field {exc}") from exc


# --- UDR ------------------------------------------------------------------


@dataclass(frozen=True)
class RecommendOutcome:
    algorithm: str
    masked_scores: tuple[float, ...]
    implemented: bool


@dataclass(frozen=True)
class Recommendation:
    algorithm: str
    tuned_configuration: Configuration
    tuned_score: float
    backend_used: str
    masked_scores: tuple[float, ...]
    implemented: bool = True
    budget_exhausted: bool = False


def recommend(
    model: DecisionModel,
    dataset: Dataset,
    portfolio: Sequence[AlgorithmSpec] | None = None,
) -> RecommendOutcome:
    """Pick the highest-scoring algorithm whose capabilities admit the dataset.

    Capability-rejected indices are masked to -inf before the argmax; ties
    resolve in portfolio order. Names absent from the portfolio cannot be
    capability-checked: they stay eligible and are flagged not-implemented
    when chosen.
    """
    specs = portfolio_by_name(portfolio)
    scores = model.scores_for(dataset)
    masked = scores.astype(float).copy()
    for i, name in enumerate(model.portfolio_names):
        spec = specs.get(name)
        if spec is not None and not admits(spec, dataset):
            masked[i] = -math.inf
    if not np.isfinite(masked).any():
        raise CapabilityError(f"no algorithm in the portfolio can process dataset {dataset.name!r}")
    winner = int(np.argmax(masked))
    name = model.portfolio_names[winner]
    return RecommendOutcome(
        algorithm=name,
        masked_scores=tuple(float(v) for v in masked),
        implemented=name in specs,
    )


def run_udr(
    model: DecisionModel,
    dataset: Dataset,
    time_limit: float,
    seed: int = 0,
    portfolio: Sequence[AlgorithmSpec] | None = None,
    threshold_seconds: float = 600.0,
    folds: int = 10,
    population_size: int = 50,
    max_generations: int = 100,
    clock: Callable[[], float] = time.monotonic,
) -> Recommendation:
    """Recommend an algorithm and tune it within the time budget.

    One evaluation of the algorithm's default configuration doubles as the
    backend-selection probe; the default is then injected into the chosen
    backend's initial design so tuning never ends below it. If the probe
    already exhausts the budget the default configuration is returned with a
    budget-exhausted flag.
    """
    outcome = recommend(model, dataset, portfolio)
    if not outcome.implemented:
        raise CapabilityError(
            f"recommended algorithm {outcome.algorithm!r} is not implemented in the portfolio; "
            "provide an implementation or alias it onto one"
        )
    specs = portfolio_by_name(portfolio)
    spec = specs[outcome.algorithm]
    cv_seed = derive_seed(seed, "udr-cv")

    def objective(config: Configuration) -> float:
        return cross_val_score(spec, dataset, config, k=folds, seed=cv_seed).accuracy

    default = spec.search_space.default_configuration()
    probe = probe_objective(objective, default, clock=clock)
    backend = backend_for_probe(probe, threshold_seconds)
    remaining = time_limit - probe.elapsed_seconds
    if remaining <= 0:
        if probe.failed:
            raise CapabilityError(
                f"default configuration of {outcome.algorithm!r} failed to evaluate within the budget"
            )
        return Recommendation(
            algorithm=outcome.algorithm,
            tuned_configuration=default,
            tuned_score=probe.score,
            backend_used=backend,
            masked_scores=outcome.masked_scores,
            budget_exhausted=True,
        )

    if backend == GA:
        result = ga_optimize(
            spec.search_space,
            objective,
            population_size=population_size,
            max_generations=max_generations,
            time_limit=remaining,
            seed=derive_seed(seed, "udr-ga"),
            initial_configurations=[default],
            clock=clock,
        )
    else:
        result = bo_optimize(
            spec.search_space,
            objective,
            max_evaluations=UNBOUNDED_EVALUATIONS,
            time_limit=remaining,
            seed=derive_seed(seed, "udr-bo"),
            initial_configurations=[default],
            clock=clock,
        )
    return Recommendation(
        algorithm=outcome.algorithm,
        tuned_configuration=result.best_configuration,
        tuned_score=result.best_score,
        backend_used=backend,
        masked_scores=outcome.masked_scores,
    )


# --- DMD orchestration ----------------------------------------------------


def run_dmd(
    experience_path: str | Path,
    registry_path: str | Path,
    seed: int = 0,
    aliases: Mapping[str, str] | None = None,
    settings: RunConfig | None = None,
    portfolio: Sequence[AlgorithmSpec] | None = None,
) -> DecisionModel:
    """Full offline pipeline: acquire, select features, search, train.

    Failures are wrapped in StageError carrying the stage name so callers can
    tell which of the four stages broke.
    """
    settings = settings if settings is not None else RunConfig()
    train_params = {
        "learning_rate": settings.mlp.learning_rate,
        "batch_size": settings.mlp.batch_size,
        "epsilon": settings.mlp.epsilon,
        "patience": settings.mlp.early_stopping_patience,
        "tol": settings.mlp.early_stopping_tol,
        "invscaling_power": settings.mlp.invscaling_power,
    }

    try:
        store = load_experiences(experience_path, aliases=aliases)
        if not store.records:
            raise InputError(f"{experience_path}: no experience records")
        pairs = acquire_knowledge(store, min_algorithms=settings.pipeline.min_algorithms)
        registry = load_registry(registry_path)
        table = build_knowledge_table(pairs, registry, portfolio)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("acquire", str(exc)) from exc

    try:
        selected = select_features(
            table,
            seed=seed,
            population_size=settings.ga.population,
            max_generations=settings.ga.generations,
            folds=settings.cv.fitness_folds,
            train_params=train_params,
        )
    except Exception as exc:
        raise StageError("features", str(exc)) from exc

    try:
        architecture, search_mse = _search_architecture_scored(
            table,
            selected,
            settings.pipeline.architecture_precision,
            seed,
            settings.ga.population,
            settings.ga.generations,
            settings.cv.fitness_folds,
            train_params,
        )
    except Exception as exc:
        raise StageError("architecture", str(exc)) from exc

    try:
        model = train_decision_model(table, selected, architecture, seed=seed, train_params=train_params)
    except Exception as exc:
        raise StageError("train", str(exc)) from exc
    model.provenance["stage_seeds"] = {
        stage: derive_seed(seed, stage) for stage in ("feature-ga", "architecture-ga", "decision-train-0")
    }
    model.provenance["architecture_cv_mse"] = search_mse
    model.provenance["architecture"] = {
        "hidden_layers": architecture.hidden_layers,
        "hidden_layer_size": architecture.hidden_layer_size,
        "activation": architecture.activation,
        "solver": architecture.solver,
    }
    return model
