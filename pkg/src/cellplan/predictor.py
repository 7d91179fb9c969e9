"""Feedforward coverage regressor: features of a grid point -> predicted RSSI (dBm).

Plain numpy multilayer perceptron with tanh hidden layers and a linear output,
trained by full-batch gradient descent on mean squared error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cellplan.grid import N_FEATURES, CoverageMap, GridMismatchError, build_feature_matrix

MAGIC = "CPMODEL 1"
MAX_HALVINGS = 60
LR_GROWTH = 1.05  # applied after every accepted step; halving still guards increases


class DivergenceError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


class ModelCorruptError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    hidden_dims: tuple[int, ...] = (32, 16)
    learning_rate: float = 0.01
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden layer widths must be positive")


@dataclass
class Model:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]  # weights[k] has shape (layer_dims[k], layer_dims[k+1])
    biases: list[np.ndarray]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    seed: int = 0
    loss_history: list[float] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        dims = self.layer_dims
        if len(dims) < 2 or dims[-1] != 1:
            raise ModelCorruptError(f"layer dims {dims} must have at least 2 entries and end in 1")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ModelCorruptError("number of weight/bias arrays does not match layer dims")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
                raise ModelCorruptError(f"layer {k} has shapes {W.shape}/{b.shape}, "
                                        f"expected ({dims[k]}, {dims[k + 1]})/({dims[k + 1]},)")
        if self.feature_mean.shape != (dims[0],) or self.feature_std.shape != (dims[0],):
            raise ModelCorruptError("normalization stats do not match input width")
        if np.any(self.feature_std <= 0):
            raise ModelCorruptError("normalization std entries must be positive")

    @property
    def n_inputs(self) -> int:
        return self.layer_dims[0]

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Batch prediction on raw (unstandardized) features, shape (k, n_inputs) -> (k,).

        Each row's result is bit-identical whatever the batch size.
        """
        a = (np.asarray(X, dtype=float) - self.feature_mean) / self.feature_std
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            # explicit reduction rather than BLAS, whose kernels vary with batch shape
            a = (a[:, :, None] * W[None, :, :]).sum(axis=1) + b
            if k < len(self.weights) - 1:
                a = np.tanh(a)
        return a[:, 0]


def init_model(dims, mean, std, seed) -> Model:
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-lim, lim, size=fan_out))
    return Model(tuple(dims), weights, biases, np.asarray(mean, float), np.asarray(std, float), seed)


def _forward_cache(model: Model, Z: np.ndarray):
    acts = [Z]
    a = Z
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        a = a @ W + b
        if k < last:
            a = np.tanh(a)
        acts.append(a)
    return acts


def loss_and_grads(model: Model, X: np.ndarray, y: np.ndarray):
    """Mean squared error over the batch and its gradients w.r.t. every weight and bias."""
    Z = (X - model.feature_mean) / model.feature_std
    acts = _forward_cache(model, Z)
    resid = acts[-1][:, 0] - y
    loss = float(np.mean(resid ** 2))
    delta = (2.0 / len(y)) * resid[:, None]
    gW, gb = [None] * len(model.weights), [None] * len(model.weights)
    for k in range(len(model.weights) - 1, -1, -1):
        gW[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ model.weights[k].T) * (1.0 - acts[k] ** 2)
    return loss, gW, gb


def _mse(model, X, y):
    # same arithmetic path as loss_and_grads so accepted steps never raise the recorded loss
    Z = (X - model.feature_mean) / model.feature_std
    return float(np.mean((_forward_cache(model, Z)[-1][:, 0] - y) ** 2))


def _output(model, X):
    Z = (X - model.feature_mean) / model.feature_std
    return float(_forward_cache(model, Z)[-1][0, 0])


def train(dataset, hp: Hyperparams | None = None) -> Model:
    """Fit a model to ``dataset`` (anything with ``features`` and ``targets``).

    An epoch's step is retried at half the learning rate whenever it would
    raise the loss, so the recorded loss history never increases. Accepted
    steps grow the rate by ``LR_GROWTH``. The output layer starts at zero
    weights with its bias at the mean target.
    """
    hp = hp or Hyperparams()
    X = np.asarray(dataset.features, dtype=float)
    y = np.asarray(dataset.targets, dtype=float)
    if len(y) == 0:
        raise ValueError("cannot train on an empty dataset")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std < 1e-12] = 1.0
    dims = (X.shape[1], *hp.hidden_dims, 1)
    model = init_model(dims, mean, std, hp.seed)
    # start from the constant-mean fit
    model.weights[-1][:] = 0.0
    model.biases[-1][:] = y.mean()

    lr = hp.learning_rate
    loss, gW, gb = loss_and_grads(model, X, y)
    history = [loss]
    for epoch in range(1, hp.epochs + 1):
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in gW + gb):
            raise DivergenceError(f"divergence: non-finite loss or gradient at epoch {epoch}")
        for _ in range(MAX_HALVINGS):
            trial = Model(dims, [W - lr * g for W, g in zip(model.weights, gW)],
                          [b - lr * g for b, g in zip(model.biases, gb)], mean, std, hp.seed)
            trial_loss = _mse(trial, X, y)
            if np.isfinite(trial_loss) and trial_loss <= loss:
                model = trial
                lr *= LR_GROWTH
                break
            lr *= 0.5
        loss, gW, gb = loss_and_grads(model, X, y)
        history.append(loss)
    model.loss_history = history
    return model


def predict_point(model: Model, features) -> float:
    f = np.asarray(features, dtype=float)
    if f.shape != (model.n_inputs,):
        raise GridMismatchError(f"feature vector has shape {f.shape}, model expects ({model.n_inputs},)")
    return float(model.forward(f[None, :])[0])


def predict_map(model: Model, config, scenario) -> CoverageMap:
    X = build_feature_matrix(config, scenario)
    if X.shape[1] != model.n_inputs:
        raise GridMismatchError(f"model expects {model.n_inputs} features, got {X.shape[1]}")
    return CoverageMap(config.grid, model.forward(X))


def model_evaluator(model: Model, scenario):
    return lambda config: predict_map(model, config, scenario)


def gradient_check(model: Model, sample, epsilon: float = 1e-5) -> float:
    """Max relative error between backprop partials of the squared error on one
    sample and central finite differences."""
    x, target = sample
    X = np.asarray(x, dtype=float)[None, :]
    y = np.array([float(target)])
    _, gW, gb = loss_and_grads(model, X, y)
    worst = 0.0
    for params, grads in ((model.weights, gW), (model.biases, gb)):
        for P, G in zip(params, grads):
            flat, gflat = P.reshape(-1), G.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + epsilon
                up = _output(model, X)
                flat[j] = orig - epsilon
                down = _output(model, X)
                flat[j] = orig
                # (up-y)^2 - (down-y)^2 factored, so a large loss does not swamp the difference
                numeric = (up - down) * (up + down - 2 * y[0]) / (2 * epsilon)
                denom = max(abs(numeric), abs(gflat[j]), 1e-8)
                worst = max(worst, abs(numeric - gflat[j]) / denom)
    return worst


def _line(v) -> str:
    return " ".join(f"{x:.17g}" for x in np.asarray(v, dtype=float).ravel())


def dump_model(model: Model) -> str:
    lines = [MAGIC, " ".join(str(d) for d in model.layer_dims),
             _line(model.feature_mean), _line(model.feature_std)]
    for W, b in zip(model.weights, model.biases):
        lines.append(_line(W))
        lines.append(_line(b))
    return "\n".join(lines) + "\n"


def save_model(model: Model, path) -> None:
    Path(path).write_text(dump_model(model))


def load_model(path) -> Model:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ModelFormatError(f"{path}: missing '{MAGIC}' header")
    try:
        dims = tuple(int(t) for t in lines[1].split())
        nums = [np.array([float(t) for t in line.split()]) for line in lines[2:]]
    except (IndexError, ValueError) as exc:
        raise ModelCorruptError(f"{path}: unreadable model body ({exc})") from None
    n_layers = len(dims) - 1
    if n_layers < 1 or len(nums) != 2 + 2 * n_layers:
        raise ModelCorruptError(f"{path}: expected {2 + 2 * max(n_layers, 0)} data lines, found {len(nums)}")
    weights, biases = [], []
    for k in range(n_layers):
        W, b = nums[2 + 2 * k], nums[3 + 2 * k]
        if W.size != dims[k] * dims[k + 1] or b.size != dims[k + 1]:
            raise ModelCorruptError(f"{path}: layer {k} has wrong number of values")
        weights.append(W.reshape(dims[k], dims[k + 1]))
        biases.append(b)
    return Model(dims, weights, biases, nums[0], nums[1])


def default_dims(hp: Hyperparams) -> tuple[int, ...]:
    return (N_FEATURES, *hp.hidden_dims, 1)
