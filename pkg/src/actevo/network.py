"""Dense feed-forward binary classifier with expression-tree activations.

The architecture is fixed by the experiment design: an input projection
(n_features -> nodes), one to three hidden blocks (nodes -> nodes) and a
single output unit.  Every layer applies one evolved expression; the output
slot can instead use the fixed logistic function.  Training is mini-batch
gradient descent with first/second moment estimates and bias correction,
binary cross-entropy loss, and loss-based early stopping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expressions as ex
from .expressions import Expr

EVOLVED = "evolved"
FIXED_SIGMOID = "fixed_sigmoid"

FAILURE_NONE = "none"
FAILURE_NAN_LOSS = "nan_loss"
FAILURE_NON_FINITE_WEIGHTS = "non_finite_weights"

_PROB_EPS = 1e-7


@dataclass
class NetworkConfig:
    n_features: int
    hidden_layers: int = 1
    nodes_per_hidden: int = 8
    max_epochs: int = 50
    batch_size: int = 4
    early_stop_patience: int = 5
    early_stop_min_delta: float = 1e-4
    learning_rate: float = 0.001
    moment_decays: tuple[float, float] = (0.9, 0.999)
    epsilon: float = 1e-7
    output_activation: str = EVOLVED

    def validate(self) -> None:
        if self.n_features < 1:
            raise ValueError("n_features must be at least 1")
        if not 1 <= self.hidden_layers <= 3:
            raise ValueError(f"hidden_layers must be in [1, 3], got {self.hidden_layers}")
        for name in ("nodes_per_hidden", "max_epochs", "batch_size", "early_stop_patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.output_activation not in (EVOLVED, FIXED_SIGMOID):
            raise ValueError(f"output_activation must be {EVOLVED!r} or {FIXED_SIGMOID!r}")

    @property
    def n_activations(self) -> int:
        """Expression count: input + hidden layers, plus output when evolved."""
        extra = 1 if self.output_activation == EVOLVED else 0
        return self.hidden_layers + 1 + extra

    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.n_features] + [self.nodes_per_hidden] * (self.hidden_layers + 1) + [1]
        return list(zip(dims[:-1], dims[1:]))


@dataclass
class TrainReport:
    epochs_run: int = 0
    final_train_loss: float = float("nan")
    validation_accuracy: float = 0.0
    failed: bool = False
    failure_kind: str = FAILURE_NONE
    guard_batches: int = 0
    total_batches: int = 0

    @property
    def all_batches_guarded(self) -> bool:
        return self.total_batches > 0 and self.guard_batches == self.total_batches


@dataclass
class Network:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[Expr]
    output_sigmoid: bool
    config: NetworkConfig

    @property
    def n_layers(self) -> int:
        return len(self.weights)


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_network(config: NetworkConfig, activations: list[Expr], seed: int = 0) -> Network:
    """Uniform weights in [-L, L] with L = sqrt(6/(fan_in+fan_out)); zero biases."""
    config.validate()
    if len(activations) != config.n_activations:
        raise ValueError(
            f"expected {config.n_activations} activation expressions for "
            f"{config.hidden_layers} hidden layer(s) with "
            f"{config.output_activation} output, got {len(activations)}"
        )
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in config.layer_shapes():
        limit = glorot_limit(fan_in, fan_out)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(
        weights=weights,
        biases=biases,
        activations=list(activations),
        output_sigmoid=config.output_activation == FIXED_SIGMOID,
        config=config,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cache(net: Network, X: np.ndarray):
    """Forward pass keeping per-layer outputs and activation slopes.

    Returns (layer_inputs, slopes, probabilities, guard_tripped).  A guard
    trip zeroes that layer's output and slope, so gradients stop there while
    the zeroed values keep flowing forward.
    """
    a = X
    layer_inputs = [X]
    slopes = []
    guard = False
    with np.errstate(all="ignore"):
        for i in range(net.n_layers):
            z = a @ net.weights[i] + net.biases[i]
            if i == net.n_layers - 1 and net.output_sigmoid:
                a = _sigmoid(z)
                slopes.append(a * (1.0 - a))
            else:
                values, deriv, status = ex.evaluate_with_derivative(net.activations[i], z)
                if status != ex.OK:
                    guard = True
                a = values
                slopes.append(deriv if status == ex.OK else np.zeros_like(z))
            layer_inputs.append(a)
    return layer_inputs, slopes, a[:, 0], guard


def forward(net: Network, X) -> tuple[np.ndarray, bool]:
    """Probabilities for a batch plus whether any layer tripped a guard."""
    X = np.asarray(X, dtype=float)
    _, _, p, guard = _forward_cache(net, X)
    return p, guard


def predict_labels(net: Network, X) -> np.ndarray:
    """Threshold at 0.5: probability >= 0.5 maps to label 1."""
    p, _ = forward(net, X)
    return (p >= 0.5).astype(int)


def bce_loss(p: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clamped away from 0 and 1."""
    with np.errstate(all="ignore"):
        pc = np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
        return float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def loss_and_gradients(net: Network, X: np.ndarray, y: np.ndarray):
    """Mean BCE over the batch plus its gradients for every parameter.

    Returns (loss, gradients, guard_tripped) where gradients line up with
    ``net.weights + net.biases``.  Gradients are zero wherever the
    probability clamp or a guard trip cuts the chain.
    """
    layer_inputs, slopes, p, guard = _forward_cache(net, X)
    n = len(y)
    with np.errstate(all="ignore"):
        pc = np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
        loss = float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))
        dloss_dp = (pc - y) / (pc * (1.0 - pc)) / n
    dloss_dp = np.where((p > _PROB_EPS) & (p < 1.0 - _PROB_EPS), dloss_dp, 0.0)
    delta = dloss_dp[:, None] * slopes[-1]
    grads_w: list = [None] * net.n_layers
    grads_b: list = [None] * net.n_layers
    with np.errstate(all="ignore"):
        for layer in range(net.n_layers - 1, -1, -1):
            grads_w[layer] = layer_inputs[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ net.weights[layer].T) * slopes[layer - 1]
    return loss, grads_w + grads_b, guard


def train(
    net: Network,
    X_train,
    y_train,
    X_val,
    y_val,
    config: NetworkConfig | None = None,
    seed: int = 0,
) -> TrainReport:
    """Fit in place; aborts immediately on non-finite loss or parameters.

    Sample order is reshuffled every epoch from the given seed.  Training
    stops early when the epoch loss fails to improve by at least
    ``early_stop_min_delta`` for ``early_stop_patience`` consecutive epochs.
    """
    config = config or net.config
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=int)
    n = len(X_train)
    if n == 0 or len(X_val) == 0:
        raise ValueError("training and validation parts must be non-empty")
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds training-set size {n}")

    rng = np.random.default_rng(seed)
    beta1, beta2 = config.moment_decays
    params = net.weights + net.biases
    first_moment = [np.zeros_like(p) for p in params]
    second_moment = [np.zeros_like(p) for p in params]
    steps = 0

    report = TrainReport()
    best_loss = np.inf
    stall = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, config.batch_size):
            batch = order[lo : lo + config.batch_size]
            Xb, yb = X_train[batch], y_train[batch]
            batch_loss, grads, guard = loss_and_gradients(net, Xb, yb)
            report.total_batches += 1
            report.guard_batches += int(guard)
            if not np.isfinite(batch_loss):
                report.failed = True
                report.failure_kind = FAILURE_NAN_LOSS
                report.epochs_run = epoch
                report.final_train_loss = batch_loss
                return report
            loss_sum += batch_loss * len(batch)

            steps += 1
            lr = config.learning_rate
            ok = True
            with np.errstate(all="ignore"):
                for j, (param, grad) in enumerate(zip(params, grads)):
                    first_moment[j] = beta1 * first_moment[j] + (1.0 - beta1) * grad
                    second_moment[j] = beta2 * second_moment[j] + (1.0 - beta2) * grad * grad
                    m_hat = first_moment[j] / (1.0 - beta1**steps)
                    v_hat = second_moment[j] / (1.0 - beta2**steps)
                    param -= lr * m_hat / (np.sqrt(v_hat) + config.epsilon)
                    if not np.all(np.isfinite(param)):
                        ok = False
            if not ok:
                report.failed = True
                report.failure_kind = FAILURE_NON_FINITE_WEIGHTS
                report.epochs_run = epoch
                report.final_train_loss = loss_sum / n
                return report

        epoch_loss = loss_sum / n
        report.epochs_run = epoch + 1
        report.final_train_loss = epoch_loss
        if epoch_loss < best_loss - config.early_stop_min_delta:
            best_loss = epoch_loss
            stall = 0
        else:
            stall += 1
            if stall >= config.early_stop_patience:
                break

    labels = predict_labels(net, X_val)
    report.validation_accuracy = float(np.mean(labels == y_val))
    return report


def dump_network(net: Network) -> str:
    """Full-precision textual record of config, activations and parameters."""
    lines = [
        f"n_features: {net.config.n_features}",
        f"hidden_layers: {net.config.hidden_layers}",
        f"nodes_per_hidden: {net.config.nodes_per_hidden}",
        f"output: {'sigmoid' if net.output_sigmoid else 'evolved'}",
        "activations:",
    ]
    for i, expr in enumerate(net.activations):
        lines.append(f"  [{i}] {ex.to_text(expr)}")
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"layer {i} weights {W.shape[0]}x{W.shape[1]}:")
        for row in W:
            lines.append("  " + " ".join(repr(float(v)) for v in row))
        lines.append(f"layer {i} biases:")
        lines.append("  " + " ".join(repr(float(v)) for v in b))
    return "\n".join(lines) + "\n"
