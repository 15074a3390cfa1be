"""From-scratch multilayer perceptron with the ten searchable hyperparameters.

The net serves two roles: a softmax/cross-entropy classifier (feature
selection fitness) and an identity/squared-error regressor (the decision
model). Training is mini-batch gradient descent with either plain sgd
(momentum + one of three learning-rate schedules) or adam, a held-out
validation split for early stopping, and a single automatic restart at a
tenth of the learning rate if the loss goes non-finite.

All randomness (weight init, shuffles, validation split) flows from the seed
given at init, so identical (config, seed, data) reproduce identical weights.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, TrainingDivergedError

ACTIVATIONS = ("relu", "tanh", "logistic", "identity")
SOLVERS = ("sgd", "adam")
SCHEDULES = ("constant", "invscaling", "adaptive")
OUTPUT_MODES = ("classifier", "regressor")

# Training constants not part of the searched configuration; callers may
# override through the train() keyword arguments.
BASE_LEARNING_RATE = 1e-3
BATCH_SIZE = 32
ADAM_EPSILON = 1e-8
EARLY_STOP_PATIENCE = 10
EARLY_STOP_TOL = 1e-4
INVSCALING_POWER = 0.5


@dataclass(frozen=True)
class MlpConfig:
    """The tunable hyperparameters (momentum/schedule apply to sgd only,
    beta1/beta2 to adam only)."""

    hidden_layers: int = 1
    hidden_layer_size: int = 32
    activation: str = "relu"
    solver: str = "adam"
    learning_rate_schedule: str = "constant"
    max_iter: int = 200
    momentum: float = 0.9
    validation_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.9

    def validate(self) -> "MlpConfig":
        checks = [
            (1 <= self.hidden_layers <= 20, "hidden_layers must be in 1..20"),
            (5 <= self.hidden_layer_size <= 100, "hidden_layer_size must be in 5..100"),
            (self.activation in ACTIVATIONS, f"activation must be one of {ACTIVATIONS}"),
            (self.solver in SOLVERS, f"solver must be one of {SOLVERS}"),
            (
                self.learning_rate_schedule in SCHEDULES,
                f"learning_rate_schedule must be one of {SCHEDULES}",
            ),
            (100 <= self.max_iter <= 500, "max_iter must be in 100..500"),
            (0.01 <= self.momentum <= 0.99, "momentum must be in 0.01..0.99"),
            (0.01 <= self.validation_fraction <= 0.99, "validation_fraction must be in 0.01..0.99"),
            (0.01 <= self.beta1 <= 0.99, "beta1 must be in 0.01..0.99"),
            (0.01 <= self.beta2 <= 0.99, "beta2 must be in 0.01..0.99"),
        ]
        for ok, message in checks:
            if not ok:
                raise InputError(f"invalid MLP config: {message}")
        return self


@dataclass
class MlpModel:
    config: MlpConfig
    input_dim: int
    output_dim: int
    output_mode: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int
    history: list[tuple[float, float]] | None = None  # (train_loss, val_loss) per epoch

    def layer_dims(self) -> list[int]:
        return [self.input_dim] + [self.config.hidden_layer_size] * self.config.hidden_layers + [self.output_dim]


def init(config: MlpConfig, input_dim: int, output_dim: int, output_mode: str, seed: int) -> MlpModel:
    """Build a model with Glorot-uniform weights and zero biases."""
    config.validate()
    if input_dim < 1 or output_dim < 1:
        raise InputError("input_dim and output_dim must be >= 1")
    if output_mode not in OUTPUT_MODES:
        raise InputError(f"output_mode must be one of {OUTPUT_MODES}")
    rng = np.random.default_rng(seed)
    dims = [input_dim] + [config.hidden_layer_size] * config.hidden_layers + [output_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        s = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(
        config=config,
        input_dim=input_dim,
        output_dim=output_dim,
        output_mode=output_mode,
        weights=weights,
        biases=biases,
        seed=seed,
    )


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "logistic":
        # Stable sigmoid: exp only ever sees non-positive arguments.
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    return z


def _activate_grad(name: str, a: np.ndarray) -> np.ndarray:
    """Derivative expressed through the activation value a = act(z)."""
    if name == "relu":
        return (a > 0).astype(a.dtype)
    if name == "tanh":
        return 1.0 - a * a
    if name == "logistic":
        return a * (1.0 - a)
    return np.ones_like(a)


def _forward(model: MlpModel, x: np.ndarray) -> list[np.ndarray]:
    """Return the activations of every layer, input included."""
    acts = [x]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        acts.append(z if i == last else _activate(model.config.activation, z))
    return acts


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Forward pass; classifier outputs are softmax probabilities."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise InputError(f"input has {x.shape[1]} features, model expects {model.input_dim}")
    out = _forward(model, x)[-1]
    if model.output_mode == "classifier":
        out = _softmax(out)
    return out[0] if single else out


def _prepare_targets(model: MlpModel, targets: Sequence) -> np.ndarray:
    if model.output_mode == "classifier":
        y = np.asarray(targets, dtype=int)
        if y.ndim != 1:
            raise InputError("classifier targets must be a 1-D array of class indices")
        if y.min() < 0 or y.max() >= model.output_dim:
            raise InputError("class index outside the model's output range")
        return y
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[1] != model.output_dim:
        raise InputError(f"regressor targets have {y.shape[1]} columns, model expects {model.output_dim}")
    return y


def loss(model: MlpModel, inputs: np.ndarray, targets: Sequence) -> float:
    """Mean cross-entropy (classifier) or mean squared error (regressor)."""
    x = np.asarray(inputs, dtype=float)
    y = _prepare_targets(model, targets)
    out = _forward(model, x)[-1]
    if model.output_mode == "classifier":
        shifted = out - out.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return float(-log_probs[np.arange(len(y)), y].mean())
    return float(np.mean((out - y) ** 2))


def gradient(model: MlpModel, inputs: np.ndarray, targets: Sequence) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact analytic gradient of the mean-reduced loss, one (dW, db) per layer."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    y = _prepare_targets(model, targets)
    batch = x.shape[0]
    acts = _forward(model, x)

    if model.output_mode == "classifier":
        probs = _softmax(acts[-1])
        onehot = np.zeros_like(probs)
        onehot[np.arange(batch), y] = 1.0
        delta = (probs - onehot) / batch
    else:
        delta = 2.0 * (acts[-1] - y) / (batch * model.output_dim)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.weights)  # type: ignore[list-item]
    for layer in range(len(model.weights) - 1, -1, -1):
        grads[layer] = (acts[layer].T @ delta, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * _activate_grad(model.config.activation, acts[layer])
    return grads


def _snapshot(model: MlpModel) -> tuple[list[np.ndarray], list[np.ndarray]]:
    return [w.copy() for w in model.weights], [b.copy() for b in model.biases]


def _restore(model: MlpModel, snap: tuple[list[np.ndarray], list[np.ndarray]]) -> None:
    model.weights = [w.copy() for w in snap[0]]
    model.biases = [b.copy() for b in snap[1]]


def train(
    model: MlpModel,
    inputs: np.ndarray,
    targets: Sequence,
    learning_rate: float = BASE_LEARNING_RATE,
    batch_size: int = BATCH_SIZE,
    epsilon: float = ADAM_EPSILON,
    patience: int = EARLY_STOP_PATIENCE,
    tol: float = EARLY_STOP_TOL,
    invscaling_power: float = INVSCALING_POWER,
) -> tuple[MlpModel, float]:
    """Train in place and return (model at best validation loss, that loss).

    The last ceil(validation_fraction * N) rows of a seeded shuffle are held
    out for early stopping (capped so at least one row trains). Training runs
    at most config.max_iter epochs and stops early once the validation loss
    has not improved by ``tol`` for ``patience`` consecutive epochs. A
    non-finite loss triggers one restart at learning_rate / 10.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise InputError("training inputs must be finite")
    if len(x) < 5:
        raise InputError("need at least 5 training rows")
    y = _prepare_targets(model, targets)
    if len(y) != len(x):
        raise InputError("inputs and targets disagree on length")

    initial = _snapshot(model)

    for attempt in range(2):
        rng = np.random.default_rng([model.seed, attempt])
        eta0 = learning_rate / (10.0**attempt)
        if attempt > 0:
            _restore(model, initial)
        try:
            val_loss = _fit(model, x, y, rng, eta0, batch_size, epsilon, patience, tol, invscaling_power)
            return model, val_loss
        except TrainingDivergedError:
            if attempt == 1:
                raise
    raise AssertionError("unreachable")


def _fit(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    eta0: float,
    batch_size: int,
    epsilon: float,
    patience: int,
    tol: float,
    invscaling_power: float,
) -> float:
    # Overflow inside an exploding run is expected; the non-finite loss check
    # below turns it into a divergence restart instead of console noise.
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _fit_inner(model, x, y, rng, eta0, batch_size, epsilon, patience, tol, invscaling_power)


def _fit_inner(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    eta0: float,
    batch_size: int,
    epsilon: float,
    patience: int,
    tol: float,
    invscaling_power: float,
) -> float:
    cfg = model.config
    n = len(x)
    n_val = min(max(1, math.ceil(cfg.validation_fraction * n)), n - 1)
    perm = rng.permutation(n)
    train_idx, val_idx = perm[: n - n_val], perm[n - n_val :]
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]
    batch = min(batch_size, len(train_idx))

    velocity = [np.zeros_like(w) for w in model.weights + model.biases]
    adam_m = [np.zeros_like(w) for w in model.weights + model.biases]
    adam_v = [np.zeros_like(w) for w in model.weights + model.biases]
    adam_t = 0

    eta = eta0
    best_val = math.inf
    best_snap = _snapshot(model)
    stall = 0
    schedule_stall = 0
    schedule_best = math.inf
    model.history = []

    for epoch in range(1, cfg.max_iter + 1):
        if cfg.solver == "sgd" and cfg.learning_rate_schedule == "invscaling":
            eta = eta0 / epoch**invscaling_power

        order = rng.permutation(len(x_train))
        for start in range(0, len(order), batch):
            idx = order[start : start + batch]
            grads = gradient(model, x_train[idx], y_train[idx])
            flat_params = model.weights + model.biases
            flat_grads = [g for g, _ in grads] + [g for _, g in grads]
            if cfg.solver == "adam":
                adam_t += 1
                for p, g, m, v in zip(flat_params, flat_grads, adam_m, adam_v):
                    m *= cfg.beta1
                    m += (1 - cfg.beta1) * g
                    v *= cfg.beta2
                    v += (1 - cfg.beta2) * g * g
                    m_hat = m / (1 - cfg.beta1**adam_t)
                    v_hat = v / (1 - cfg.beta2**adam_t)
                    p -= eta * m_hat / (np.sqrt(v_hat) + epsilon)
            else:
                for p, g, vel in zip(flat_params, flat_grads, velocity):
                    vel *= cfg.momentum
                    vel -= eta * g
                    p += vel

        train_loss = loss(model, x_train, y_train)
        val_loss = loss(model, x_val, y_val)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
        model.history.append((train_loss, val_loss))

        if cfg.solver == "sgd" and cfg.learning_rate_schedule == "adaptive":
            if val_loss < schedule_best - tol:
                schedule_stall = 0
            else:
                schedule_stall += 1
                if schedule_stall >= 2:
                    eta /= 5.0
                    schedule_stall = 0
            schedule_best = min(schedule_best, val_loss)

        if val_loss < best_val - tol:
            stall = 0
        else:
            stall += 1
        if val_loss < best_val:
            best_val = val_loss
            best_snap = _snapshot(model)
        if stall >= patience:
            break

    _restore(model, best_snap)
    return best_val


def model_to_dict(model: MlpModel) -> dict:
    """JSON-serializable form; float round-trip preserves predictions."""
    return {
        "config": asdict(model.config),
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "output_mode": model.output_mode,
        "seed": model.seed,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def model_from_dict(data: dict) -> MlpModel:
    config = MlpConfig(**data["config"]).validate()
    return MlpModel(
        config=config,
        input_dim=int(data["input_dim"]),
        output_dim=int(data["output_dim"]),
        output_mode=str(data["output_mode"]),
        weights=[np.asarray(w, dtype=float) for w in data["weights"]],
        biases=[np.asarray(b, dtype=float) for b in data["biases"]],
        seed=int(data["seed"]),
    )
