"""Command-line interface: one executable, six subcommands.

Data artifacts are JSON/JSONL; configuration is TOML (``--config`` or the
CASH_FORGE_CONFIG environment variable), merged as defaults < file < flags.
Exit codes: 0 success, 2 input error, 3 stage failure. Logs go to stderr,
data to stdout or the requested output files.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .config import ENV_CONFIG_PATH, RunConfig, load_config
from .errors import CapabilityError, CashForgeError, InputError, StageError
from .experience_store import load_aliases, load_experiences
from .hpo_engine import bo_optimize, ga_optimize, select_backend
from .hpo_engine.backend import GA
from .hpo_engine.space import load_space
from .knowledge_graph import acquire_knowledge
from .meta_features import extract, load_dataset
from .pipeline import Recommendation, load_model, recommend, run_dmd, run_udr, save_model
from .portfolio import (
    cross_val_score,
    pmax_pavg_from_scores,
    poratio_from_scores,
    portfolio_by_name,
    portfolio_performances,
)
from .seeding import derive_seed

log = logging.getLogger("cashforge")


_COMMON_DEFAULTS = {
    "config": None,
    "seed": None,
    "threads": None,
    "json": False,
    "no_timestamps": False,
}


def _common_options() -> argparse.ArgumentParser:
    # SUPPRESS defaults let the same flags appear before or after the
    # subcommand without the inner parser wiping the outer value
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="TOML configuration file (falls back to $CASH_FORGE_CONFIG)")
    common.add_argument("--seed", type=int, help="global seed (overrides the config file)")
    common.add_argument("--threads", type=int, help="cap worker parallelism (0 = available cores)")
    common.add_argument("--json", action="store_true", help="machine-readable reports")
    common.add_argument(
        "--no-timestamps", action="store_true", help="zero elapsed-time fields for reproducible output"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="cash-forge", description=__doc__, parents=[common])
    parser.add_argument("--version", action="version", version=f"cash-forge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=lambda **kw: argparse.ArgumentParser(parents=[common], **kw))

    p = sub.add_parser("acquire", help="derive knowledge pairs from an experience file")
    p.add_argument("--experiences", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-algorithms", type=int, default=None)
    p.add_argument("--aliases")

    p = sub.add_parser("features", help="print the 23 meta-features of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)

    p = sub.add_parser("evaluate", help="tuned portfolio performance metrics on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--algorithm", default="all", help="portfolio algorithm name or 'all'")
    p.add_argument("--budget-seconds", type=float, default=None, help="GA tuning budget per algorithm")

    p = sub.add_parser("tune", help="optimize one algorithm's hyperparameters on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--algorithm", required=True)
    p.add_argument("--space", help="JSON search-space file overriding the algorithm's built-in space")
    p.add_argument("--backend", choices=["auto", "ga", "bo"], default="auto")
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--max-evaluations", type=int, default=None)
    p.add_argument("--out", help="history JSONL path (default: stdout)")

    p = sub.add_parser("train", help="train a decision model from experiences (DMD)")
    p.add_argument("--experiences", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--aliases")

    p = sub.add_parser("recommend", help="recommend (and optionally tune) an algorithm for a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--tune", action="store_true")
    p.add_argument("--time-limit", type=float, default=None)

    return parser


def _json_scores(values) -> list:
    return [None if not math.isfinite(v) else v for v in values]


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _cmd_acquire(args, config: RunConfig) -> int:
    aliases = load_aliases(args.aliases) if args.aliases else None
    store = load_experiences(args.experiences, aliases=aliases)
    min_algorithms = (
        args.min_algorithms if args.min_algorithms is not None else config.pipeline.min_algorithms
    )
    pairs = acquire_knowledge(store, min_algorithms=min_algorithms)
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(
                json.dumps(
                    {
                        "instance_id": pair.instance_id,
                        "optimal_algorithm": pair.optimal_algorithm,
                        "support_count": pair.support_count,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    log.info("acquired %d knowledge pairs from %d records", len(pairs), len(store.records))
    return 0


def _cmd_features(args, config: RunConfig) -> int:
    dataset = load_dataset(args.data, args.schema)
    _emit(extract(dataset).as_dict())
    return 0


def _cmd_evaluate(args, config: RunConfig) -> int:
    dataset = load_dataset(args.data, args.schema)
    specs = portfolio_by_name()
    if args.algorithm != "all" and args.algorithm not in specs:
        raise InputError(f"unknown algorithm {args.algorithm!r}; expected one of {sorted(specs)} or 'all'")
    budget = args.budget_seconds if args.budget_seconds is not None else config.budgets.tuning_time_limit
    performances = portfolio_performances(
        dataset,
        seed=config.seed,
        k=config.cv.score_folds,
        time_limit=budget,
        population_size=config.ga.population,
        max_generations=config.ga.generations,
        threads=config.worker_count(),
    )
    scores = {name: (p.accuracy if p is not None else None) for name, p in performances.items()}
    pmax, pavg = pmax_pavg_from_scores(scores)
    report = {
        "dataset": dataset.name,
        "pmax": pmax,
        "pavg": pavg,
        "per_algorithm": {
            name: {
                "applicable": p is not None,
                "performance": scores[name],
                "poratio": poratio_from_scores(scores, name),
                "configuration": p.configuration if p is not None else None,
            }
            for name, p in performances.items()
        },
    }
    if args.algorithm != "all":
        report["selected"] = args.algorithm
    if args.json:
        _emit(report)
    else:
        print(f"dataset {dataset.name}: Pmax={pmax:.4f} Pavg={pavg:.4f}")
        for name, entry in report["per_algorithm"].items():
            perf = "n/a" if entry["performance"] is None else f"{entry['performance']:.4f}"
            print(f"  {name:15s} P={perf:8s} PORatio={entry['poratio']:.4f}")
    return 0


def _cmd_tune(args, config: RunConfig) -> int:
    dataset = load_dataset(args.data, args.schema)
    specs = portfolio_by_name()
    if args.algorithm not in specs:
        raise InputError(f"unknown algorithm {args.algorithm!r}; expected one of {sorted(specs)}")
    spec = specs[args.algorithm]
    space = load_space(args.space) if args.space else spec.search_space
    cv_seed = derive_seed(config.seed, "tune-cv")

    def objective(configuration):
        return cross_val_score(spec, dataset, configuration, k=config.cv.score_folds, seed=cv_seed).accuracy

    backend = args.backend
    if backend == "auto":
        backend = select_backend(
            objective, space.default_configuration(), threshold_seconds=config.backend.threshold_seconds
        )
        log.info("backend probe selected %s", backend.upper())

    max_evaluations = (
        args.max_evaluations
        if args.max_evaluations is not None
        else config.ga.population * (config.ga.generations + 1)
    )
    if backend == GA:
        result = ga_optimize(
            space,
            objective,
            population_size=config.ga.population,
            max_generations=config.ga.generations,
            time_limit=args.time_limit,
            seed=derive_seed(config.seed, "tune-ga"),
            initial_configurations=[space.default_configuration()],
            crossover_rate=config.ga.crossover_rate,
            tournament_size=config.ga.tournament_size,
            mutation_span=config.ga.mutation_span,
        )
    else:
        result = bo_optimize(
            space,
            objective,
            max_evaluations=max_evaluations,
            time_limit=args.time_limit,
            seed=derive_seed(config.seed, "tune-bo"),
            initial_configurations=[space.default_configuration()],
            initial_design=config.bo.initial_design,
            candidate_count=config.bo.candidates,
            length_scales=config.bo.length_scales,
            noise_levels=config.bo.noise_levels,
        )

    out = Path(args.out).open("w", encoding="utf-8") if args.out else sys.stdout
    try:
        for entry in result.history:
            elapsed_ms = 0.0 if args.no_timestamps else round(entry.elapsed_seconds * 1000.0, 3)
            out.write(
                json.dumps(
                    {"config": entry.configuration, "score": entry.score, "elapsed_ms": elapsed_ms},
                    sort_keys=True,
                )
                + "\n"
            )
    finally:
        if args.out:
            out.close()
    log.info(
        "%s finished: best score %.6f after %d evaluations", backend.upper(), result.best_score,
        result.evaluation_count,
    )
    return 0


def _cmd_train(args, config: RunConfig) -> int:
    aliases = load_aliases(args.aliases) if args.aliases else None
    model = run_dmd(
        args.experiences,
        args.registry,
        seed=config.seed,
        aliases=aliases,
        settings=config,
    )
    save_model(model, args.out)
    log.info(
        "decision model written to %s (features=%s, full-set MSE %.6f)",
        args.out,
        ",".join(model.selected_features),
        model.provenance.get("full_set_mse", float("nan")),
    )
    return 0


def _cmd_recommend(args, config: RunConfig) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.data, args.schema)
    if args.tune:
        time_limit = args.time_limit if args.time_limit is not None else config.budgets.tuning_time_limit
        rec: Recommendation = run_udr(
            model,
            dataset,
            time_limit=time_limit,
            seed=config.seed,
            threshold_seconds=config.backend.threshold_seconds,
            folds=config.cv.score_folds,
            population_size=config.ga.population,
            max_generations=config.ga.generations,
        )
        payload = {
            "algorithm": rec.algorithm,
            "implemented": rec.implemented,
            "tuned_configuration": rec.tuned_configuration,
            "tuned_score": rec.tuned_score,
            "backend_used": rec.backend_used,
            "budget_exhausted": rec.budget_exhausted,
            "masked_scores": _json_scores(rec.masked_scores),
        }
        if args.json:
            _emit(payload)
        else:
            print(f"recommended {rec.algorithm} (backend {rec.backend_used.upper()})")
            print(f"tuned score {rec.tuned_score:.4f} with {rec.tuned_configuration}")
    else:
        outcome = recommend(model, dataset)
        payload = {
            "algorithm": outcome.algorithm,
            "implemented": outcome.implemented,
            "masked_scores": _json_scores(outcome.masked_scores),
        }
        if args.json:
            _emit(payload)
        else:
            flag = "" if outcome.implemented else " (not implemented in the portfolio)"
            print(f"recommended {outcome.algorithm}{flag}")
    return 0


_COMMANDS = {
    "acquire": _cmd_acquire,
    "features": _cmd_features,
    "evaluate": _cmd_evaluate,
    "tune": _cmd_tune,
    "train": _cmd_train,
    "recommend": _cmd_recommend,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, value in _COMMON_DEFAULTS.items():
        if not hasattr(args, name):
            setattr(args, name, value)
    try:
        config_path = args.config or os.environ.get(ENV_CONFIG_PATH)
        config = load_config(config_path)
        if args.seed is not None:
            config.seed = args.seed
        if args.threads is not None:
            config.threads = args.threads
        config.validate()
        return _COMMANDS[args.command](args, config)
    except StageError as exc:
        log.error("%s", exc)
        return 3
    except (InputError, CapabilityError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return 2
    except CashForgeError as exc:
        log.error("%s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
