import json

import numpy as np
import pytest

from cashforge import neural_net as nn
from cashforge import pipeline as pl
from cashforge.cli import main
from cashforge.portfolio import builtin_portfolio

from fixtures import write_dataset, write_six_row_dataset, write_wine_jsonl

PORTFOLIO_NAMES = tuple(s.name for s in builtin_portfolio())


def numeric_csv(tmp_path, name="plain", rows=36, classes=2, seed=0):
    rng = np.random.default_rng(seed)
    table = [
        (round(float(rng.normal(2.0 * (i % classes))), 6), round(float(rng.normal()), 6), f"c{i % classes}")
        for i in range(rows)
    ]
    return write_dataset(
        tmp_path, name, ["x1", "x2", "y"],
        {"x1": "numeric", "x2": "numeric", "y": "categorical"}, "y", table,
    )


def model_file(tmp_path, scores=(0.0, 0.0, 0.0, 1.0, 0.0, 0.0)):
    config = nn.MlpConfig(hidden_layers=1, hidden_layer_size=5, activation="identity")
    mlp = nn.init(config, 2, len(PORTFOLIO_NAMES), "regressor", seed=0)
    mlp.weights = [np.zeros_like(w) for w in mlp.weights]
    mlp.biases[-1] = np.asarray(scores, dtype=float)
    model = pl.DecisionModel(
        selected_features=("f1", "f7"),
        feature_means=np.zeros(2),
        feature_stds=np.ones(2),
        mlp=mlp,
        portfolio_names=PORTFOLIO_NAMES,
    )
    path = tmp_path / "model.json"
    pl.save_model(model, path)
    return path


def test_acquire_writes_knowledge_jsonl(tmp_path, capsys):
    experiences = write_wine_jsonl(tmp_path / "wine.jsonl")
    out = tmp_path / "knowledge.jsonl"
    assert main(["acquire", "--experiences", str(experiences), "--out", str(out)]) == 0
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(lines) == 1
    assert lines[0]["instance_id"] == "Wine Dataset"
    assert lines[0]["optimal_algorithm"] in {"BayesNet", "J48"}
    assert lines[0]["support_count"] > 0


def test_features_emits_the_23_vector(tmp_path, capsys):
    data, schema = write_six_row_dataset(tmp_path)
    assert main(["features", "--data", str(data), "--schema", str(schema)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) == {f"f{i}" for i in range(1, 24)}
    assert payload["f9"] == 6.0


def test_malformed_config_key_exits_2(tmp_path, capsys, caplog):
    config = tmp_path / "bad.toml"
    config.write_text("[ga]\npopulaton = 3\n", encoding="utf-8")
    data, schema = write_six_row_dataset(tmp_path)
    code = main(["--config", str(config), "features", "--data", str(data), "--schema", str(schema)])
    assert code == 2
    assert "populaton" in caplog.text


def test_invalid_config_value_exits_2(tmp_path, caplog):
    config = tmp_path / "bad.toml"
    config.write_text("[ga]\npopulation = 1\n", encoding="utf-8")
    data, schema = write_six_row_dataset(tmp_path)
    assert main(["--config", str(config), "features", "--data", str(data), "--schema", str(schema)]) == 2


def test_env_var_config_fallback(tmp_path, monkeypatch, caplog):
    config = tmp_path / "bad.toml"
    config.write_text("nonsense = 1\n", encoding="utf-8")
    monkeypatch.setenv("CASH_FORGE_CONFIG", str(config))
    data, schema = write_six_row_dataset(tmp_path)
    assert main(["features", "--data", str(data), "--schema", str(schema)]) == 2
    assert "nonsense" in caplog.text


def test_unknown_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["features", "--bogus"])
    assert err.value.code == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2


def test_missing_file_exits_2(tmp_path):
    assert main(["features", "--data", str(tmp_path / "nope.csv"), "--schema", str(tmp_path / "n.json")]) == 2


def test_recommend_json_outputs_single_object(tmp_path, capsys):
    model = model_file(tmp_path)
    data, schema = numeric_csv(tmp_path)
    code = main([
        "--json", "--seed", "3", "recommend",
        "--model", str(model), "--data", str(data), "--schema", str(schema),
    ])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["algorithm"] == "decision_tree"
    assert payload["implemented"] is True
    assert len(payload["masked_scores"]) == 6


def test_recommend_tune_json_recommendation(tmp_path, capsys):
    config = tmp_path / "small.toml"
    config.write_text("[ga]\npopulation = 4\ngenerations = 1\n\n[cv]\nscore_folds = 3\n", encoding="utf-8")
    model = model_file(tmp_path)
    data, schema = numeric_csv(tmp_path)
    code = main([
        "--json", "--seed", "3", "--config", str(config), "recommend",
        "--model", str(model), "--data", str(data), "--schema", str(schema),
        "--tune", "--time-limit", "60",
    ])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["algorithm"] == "decision_tree"
    assert payload["backend_used"] == "ga"
    assert payload["budget_exhausted"] is False
    assert 0.0 <= payload["tuned_score"] <= 1.0
    assert set(payload["tuned_configuration"]) == {"max_depth", "min_samples_split"}


def test_tune_history_is_reproducible_bytes(tmp_path):
    config = tmp_path / "small.toml"
    config.write_text("[ga]\npopulation = 4\ngenerations = 2\n\n[cv]\nscore_folds = 3\n", encoding="utf-8")
    data, schema = numeric_csv(tmp_path, seed=5)
    outputs = []
    for run in range(2):
        out = tmp_path / f"history{run}.jsonl"
        code = main([
            "--seed", "11", "--no-timestamps", "--config", str(config),
            "tune", "--data", str(data), "--schema", str(schema),
            "--algorithm", "gaussian_nb", "--backend", "ga", "--out", str(out),
        ])
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    first = json.loads(outputs[0].decode().splitlines()[0])
    assert first["elapsed_ms"] == 0.0
    assert set(first) == {"config", "score", "elapsed_ms"}


def test_tune_honors_time_limit(tmp_path):
    # cheap per-evaluation objective so the 10% slack dominates one in-flight
    # evaluation; the default budget would otherwise run thousands of rounds
    config = tmp_path / "small.toml"
    config.write_text("[cv]\nscore_folds = 3\n", encoding="utf-8")
    data, schema = numeric_csv(tmp_path, rows=120, seed=7)
    out = tmp_path / "history.jsonl"
    code = main([
        "--seed", "2", "--config", str(config),
        "tune", "--data", str(data), "--schema", str(schema),
        "--algorithm", "gaussian_nb", "--backend", "ga",
        "--time-limit", "1.5", "--out", str(out),
    ])
    assert code == 0
    entries = [json.loads(line) for line in out.read_text().splitlines()]
    assert entries, "at least the injected default must have been evaluated"
    assert len(entries) < 5050, "the search must have been cut short"
    assert entries[-1]["elapsed_ms"] <= 1.5 * 1.1 * 1000.0


def test_tune_auto_backend_probes_and_picks_ga(tmp_path, caplog):
    import logging

    caplog.set_level(logging.INFO, logger="cashforge")
    config = tmp_path / "small.toml"
    config.write_text("[ga]\npopulation = 3\ngenerations = 1\n\n[cv]\nscore_folds = 3\n", encoding="utf-8")
    data, schema = numeric_csv(tmp_path, seed=3)
    out = tmp_path / "history.jsonl"
    code = main([
        "--seed", "1", "--config", str(config),
        "tune", "--data", str(data), "--schema", str(schema),
        "--algorithm", "gaussian_nb", "--backend", "auto", "--out", str(out),
    ])
    assert code == 0
    assert "selected GA" in caplog.text


def test_tune_bo_backend_runs(tmp_path):
    config = tmp_path / "small.toml"
    config.write_text("[cv]\nscore_folds = 3\n\n[bo]\ncandidates = 50\n", encoding="utf-8")
    data, schema = numeric_csv(tmp_path, seed=9)
    out = tmp_path / "history.jsonl"
    code = main([
        "--seed", "4", "--config", str(config),
        "tune", "--data", str(data), "--schema", str(schema),
        "--algorithm", "gaussian_nb", "--backend", "bo",
        "--max-evaluations", "8", "--out", str(out),
    ])
    assert code == 0
    entries = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(entries) == 8


def test_evaluate_json_report(tmp_path, capsys):
    config = tmp_path / "small.toml"
    config.write_text("[ga]\npopulation = 3\ngenerations = 1\n\n[cv]\nscore_folds = 3\n", encoding="utf-8")
    data, schema = numeric_csv(tmp_path, seed=13)
    code = main([
        "--json", "--seed", "1", "--threads", "2", "--config", str(config),
        "evaluate", "--data", str(data), "--schema", str(schema),
        "--budget-seconds", "30",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report["per_algorithm"]) == set(PORTFOLIO_NAMES)
    assert report["per_algorithm"]["categorical_nb"]["applicable"] is False
    assert report["per_algorithm"]["categorical_nb"]["performance"] is None
    assert 0.0 <= report["pavg"] <= report["pmax"] <= 1.0
    ratios = [entry["poratio"] for entry in report["per_algorithm"].values()]
    assert all(1 / 6 - 1e-12 <= r <= 1.0 for r in ratios)


def test_evaluate_unknown_algorithm_exits_2(tmp_path):
    data, schema = numeric_csv(tmp_path)
    assert main(["evaluate", "--data", str(data), "--schema", str(schema), "--algorithm", "zzz"]) == 2


def test_train_then_recommend_round_trip(tmp_path, capsys):
    from fixtures import build_corpus

    config = tmp_path / "small.toml"
    config.write_text(
        "[ga]\npopulation = 6\ngenerations = 2\n\n[cv]\nfitness_folds = 3\nscore_folds = 4\n",
        encoding="utf-8",
    )
    experiences, registry, aliases, test_sets = build_corpus(
        tmp_path, seed=2, n_train=12, n_test=1, rows=36
    )
    model_out = tmp_path / "model.json"
    code = main([
        "--seed", "7", "--config", str(config),
        "train", "--experiences", str(experiences), "--registry", str(registry),
        "--aliases", str(aliases), "--out", str(model_out),
    ])
    assert code == 0
    assert model_out.exists()

    data, schema, _ = test_sets[0]
    code = main([
        "--json", "--seed", "7",
        "recommend", "--model", str(model_out), "--data", str(data), "--schema", str(schema),
    ])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["algorithm"] in PORTFOLIO_NAMES
