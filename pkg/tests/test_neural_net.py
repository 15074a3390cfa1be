import json

import numpy as np
import pytest

from cashforge import neural_net as nn
from cashforge.errors import InputError

from fixtures import draw_smooth_batch, finite_difference_worst_error

XOR_POINTS = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_LABELS = np.array([0, 1, 1, 0])


def trained_xor(seed=0):
    config = nn.MlpConfig(
        hidden_layers=1, hidden_layer_size=8, activation="tanh", solver="adam",
        max_iter=500, validation_fraction=0.25,
    )
    model = nn.init(config, 2, 2, "classifier", seed=seed)
    # the four patterns repeated to satisfy the minimum-row contract
    x = np.tile(XOR_POINTS, (3, 1))
    y = np.tile(XOR_LABELS, 3)
    return nn.train(model, x, y)


# --- init --------------------------------------------------------------------


def test_layer_shapes_chain():
    model = nn.init(nn.MlpConfig(hidden_layers=1, hidden_layer_size=5), 3, 2, "classifier", seed=0)
    assert [w.shape for w in model.weights] == [(3, 5), (5, 2)]
    assert [b.shape for b in model.biases] == [(5,), (2,)]


def test_same_seed_same_weights():
    a = nn.init(nn.MlpConfig(), 4, 3, "regressor", seed=9)
    b = nn.init(nn.MlpConfig(), 4, 3, "regressor", seed=9)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)


def test_out_of_range_config_rejected():
    with pytest.raises(InputError):
        nn.init(nn.MlpConfig(hidden_layers=21), 2, 2, "classifier", seed=0)
    with pytest.raises(InputError):
        nn.MlpConfig(hidden_layer_size=4).validate()
    with pytest.raises(InputError):
        nn.MlpConfig(max_iter=99).validate()
    with pytest.raises(InputError):
        nn.MlpConfig(momentum=0.999).validate()


def test_glorot_bounds_and_zero_biases():
    model = nn.init(nn.MlpConfig(hidden_layer_size=10), 6, 4, "regressor", seed=3)
    s = np.sqrt(6.0 / (6 + 10))
    assert np.abs(model.weights[0]).max() <= s
    assert np.all(model.biases[0] == 0.0)


# --- training ----------------------------------------------------------------


def test_xor_training_accuracy():
    model, _ = trained_xor()
    predictions = nn.predict(model, XOR_POINTS).argmax(axis=1)
    assert (predictions == XOR_LABELS).all()


def test_trained_xor_predicts_class_one_on_10():
    model, _ = trained_xor()
    assert nn.predict(model, np.array([1.0, 0.0])).argmax() == 1


def test_linear_target_reaches_tiny_validation_mse():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, size=(60, 1))
    config = nn.MlpConfig(
        hidden_layers=1, hidden_layer_size=8, activation="identity", solver="adam",
        max_iter=500, validation_fraction=0.2,
    )
    model = nn.init(config, 1, 1, "regressor", seed=1)
    _, val_loss = nn.train(model, x, 2.0 * x)
    assert val_loss < 1e-3


def test_training_returns_best_validation_state():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(30, 3))
    y = rng.normal(size=(30, 2))
    config = nn.MlpConfig(hidden_layers=1, hidden_layer_size=6, solver="sgd",
                          learning_rate_schedule="constant", max_iter=100, validation_fraction=0.2)
    model = nn.init(config, 3, 2, "regressor", seed=4)
    model, val_loss = nn.train(model, x, y)
    assert val_loss == pytest.approx(min(v for _, v in model.history))


def test_training_is_deterministic():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(40, 4))
    y = rng.integers(0, 3, size=40)
    outs = []
    for _ in range(2):
        model = nn.init(nn.MlpConfig(max_iter=120), 4, 3, "classifier", seed=11)
        model, _ = nn.train(model, x, y)
        outs.append([w.copy() for w in model.weights])
    for wa, wb in zip(*outs):
        np.testing.assert_array_equal(wa, wb)


def test_sgd_constant_schedule_training_loss_non_increasing():
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, size=(24, 2))
    y = x @ np.array([[1.5], [-0.5]])
    config = nn.MlpConfig(
        hidden_layers=1, hidden_layer_size=6, activation="identity", solver="sgd",
        learning_rate_schedule="constant", momentum=0.01, max_iter=200, validation_fraction=0.1,
    )
    model = nn.init(config, 2, 1, "regressor", seed=6)
    nn.train(model, x, y)
    train_losses = [t for t, _ in model.history]
    for before, after in zip(train_losses, train_losses[1:]):
        assert after <= before + 1e-6


def test_schedules_and_sgd_variants_run():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(25, 3))
    y = rng.integers(0, 2, size=25)
    for schedule in ("constant", "invscaling", "adaptive"):
        config = nn.MlpConfig(hidden_layers=1, hidden_layer_size=5, solver="sgd",
                              learning_rate_schedule=schedule, max_iter=100)
        model = nn.init(config, 3, 2, "classifier", seed=2)
        _, val_loss = nn.train(model, x, y)
        assert np.isfinite(val_loss)


def test_too_few_rows_rejected():
    model = nn.init(nn.MlpConfig(), 2, 2, "classifier", seed=0)
    with pytest.raises(InputError, match="at least 5"):
        nn.train(model, np.zeros((4, 2)), np.array([0, 1, 0, 1]))


# --- prediction ---------------------------------------------------------------


def test_classifier_outputs_sum_to_one():
    model = nn.init(nn.MlpConfig(), 5, 4, "classifier", seed=1)
    rng = np.random.default_rng(0)
    out = nn.predict(model, rng.normal(size=(20, 5)))
    assert (out >= 0).all()
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)


def test_zero_weight_regressor_outputs_zero():
    model = nn.init(nn.MlpConfig(), 3, 2, "regressor", seed=0)
    model.weights = [np.zeros_like(w) for w in model.weights]
    np.testing.assert_array_equal(nn.predict(model, np.ones(3)), np.zeros(2))


def test_dimension_mismatch_rejected():
    model = nn.init(nn.MlpConfig(), 3, 2, "classifier", seed=0)
    with pytest.raises(InputError, match="features"):
        nn.predict(model, np.ones(4))


# --- gradients ----------------------------------------------------------------


def test_gradient_against_finite_differences():
    rng = np.random.default_rng(1)
    for mode in ("classifier", "regressor"):
        for activation in nn.ACTIVATIONS:
            config = nn.MlpConfig(hidden_layers=2, hidden_layer_size=5, activation=activation)
            model = nn.init(config, 3, 2, mode, seed=7)
            x = draw_smooth_batch(model, rng, batch=6)
            y = rng.integers(0, 2, size=6) if mode == "classifier" else rng.normal(size=(6, 2))
            assert finite_difference_worst_error(model, x, y) < 1e-4


def test_dead_relu_first_layer_gradient_is_zero():
    model = nn.init(nn.MlpConfig(activation="relu", hidden_layer_size=5), 2, 2, "classifier", seed=0)
    model.weights[0] = -np.abs(model.weights[0])  # all units inactive on positive input
    grads = nn.gradient(model, np.ones((3, 2)), np.array([0, 1, 0]))
    np.testing.assert_array_equal(grads[0][0], np.zeros_like(model.weights[0]))


def test_duplicated_batch_rows_leave_mean_gradient_unchanged():
    model = nn.init(nn.MlpConfig(), 3, 2, "regressor", seed=5)
    x = np.array([[0.3, -1.0, 2.0]])
    y = np.array([[1.0, 0.0]])
    single = nn.gradient(model, x, y)
    doubled = nn.gradient(model, np.vstack([x, x]), np.vstack([y, y]))
    for (dw1, db1), (dw2, db2) in zip(single, doubled):
        np.testing.assert_allclose(dw1, dw2, atol=1e-12)
        np.testing.assert_allclose(db1, db2, atol=1e-12)


# --- serialization --------------------------------------------------------------


def test_round_trip_preserves_predictions():
    model, _ = trained_xor(seed=3)
    restored = nn.model_from_dict(json.loads(json.dumps(nn.model_to_dict(model))))
    rng = np.random.default_rng(10)
    probe = rng.normal(size=(50, 2))
    np.testing.assert_allclose(nn.predict(restored, probe), nn.predict(model, probe), atol=1e-9)
