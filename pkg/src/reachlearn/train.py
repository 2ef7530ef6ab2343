"""Training for the classifier networks.

Two algorithms:

* ``levenberg-marquardt`` (default): full-batch Gauss-Newton with a damping
  parameter mu.  A step is accepted when it strictly decreases the loss
  (then mu /= factor); otherwise it is rejected and mu *= factor.  Training
  stops on max_epochs, mu overflow past 1e10, or gradient infinity-norm
  below 1e-10.  Restricted to single-output networks with the mse loss.
* ``gradient``: mini-batch gradient descent with a fixed learning rate.

Both record a per-epoch loss history and guarantee that the returned
network's full-batch loss is no larger than the initial one.  Training is
bit-deterministic given the same network, data, and config.

``adapt`` applies one incremental gradient step per sample toward the
positive class, which repairs false negatives without retraining.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ContractError
from .nets import Network, activation_derivative, forward, layer_outputs

__all__ = [
    "DEFAULT_ADAPT_RATES",
    "TrainConfig",
    "TrainLog",
    "adapt",
    "gradient",
    "loss_value",
    "train",
]

_ALGORITHMS = ("levenberg-marquardt", "gradient")
_LOSSES = ("mse", "cross-entropy")
_MU_MAX = 1e10
_GRAD_TOL = 1e-10
_LOG_EPS = 1e-12

# incremental learning rates that repair false negatives reliably per model
DEFAULT_ADAPT_RATES = {"pendulum": 0.001, "neuron": 0.0005, "quadcopter": 0.002}


@dataclass(frozen=True)
class TrainConfig:
    """Algorithm choice and hyperparameters for train()."""

    algorithm: str = "levenberg-marquardt"
    max_epochs: int = 200
    loss: str = "mse"
    learning_rate: float = 0.01
    batch_size: int = 32
    lm_mu_init: float = 1e-3
    lm_mu_factor: float = 10.0
    patience: Optional[int] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.algorithm not in _ALGORITHMS:
            raise ConfigError(
                f"algorithm must be one of {_ALGORITHMS}, got {self.algorithm!r}"
            )
        if self.loss not in _LOSSES:
            raise ConfigError(f"loss must be one of {_LOSSES}, got {self.loss!r}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not self.learning_rate > 0.0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lm_mu_init > 0.0:
            raise ConfigError(f"lm_mu_init must be > 0, got {self.lm_mu_init}")
        if not self.lm_mu_factor > 1.0:
            raise ConfigError(f"lm_mu_factor must be > 1, got {self.lm_mu_factor}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError(f"patience must be >= 1 or None, got {self.patience}")


@dataclass(frozen=True)
class TrainLog:
    """Per-epoch full-batch losses (index 0 = before training) and outcome."""

    losses: Tuple[float, ...]
    epochs: int
    stop_reason: str
    mu_final: Optional[float]
    elapsed_seconds: float

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def _targets(net: Network, labels: np.ndarray) -> np.ndarray:
    """Targets in network output shape: {0,1} column, or one-hot for softmax."""
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ContractError(f"labels must be one-dimensional, got shape {y.shape}")
    yf = y.astype(np.float64)
    if not np.all((yf == 0.0) | (yf == 1.0)):
        raise ContractError("labels must be boolean or 0/1 valued")
    if net.activations[-1] == "softmax":
        return np.column_stack([yf, 1.0 - yf])
    if net.layer_sizes[-1] != 1:
        raise ContractError("multi-output networks require a softmax output layer")
    return yf[:, None]


def _check_batch(net: Network, states: np.ndarray, labels: np.ndarray) -> np.ndarray:
    X = np.asarray(states, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ContractError(
            f"states must have shape (n, {net.input_dim}), got {X.shape}"
        )
    if X.shape[0] == 0:
        raise ContractError("batch must be nonempty")
    if len(labels) != X.shape[0]:
        raise ContractError("states and labels must have equal length")
    return X


def _check_loss_for(net: Network, loss: str) -> None:
    if net.activations[-1] == "softmax" and loss != "cross-entropy":
        raise ConfigError("softmax outputs require the cross-entropy loss")
    if loss == "cross-entropy" and net.activations[-1] not in ("softmax", "logsig"):
        raise ConfigError("cross-entropy requires a softmax or logsig output")


def loss_value(net: Network, states: np.ndarray, labels: np.ndarray, loss: str = "mse") -> float:
    """Mean loss of the network over a batch."""
    X = _check_batch(net, states, labels)
    _check_loss_for(net, loss)
    t = _targets(net, labels)
    p = layer_outputs(net, X)[-1]
    if loss == "mse":
        return float(np.mean((p - t) ** 2))
    q = np.clip(p, _LOG_EPS, 1.0)
    if net.activations[-1] == "softmax":
        return float(-np.mean(np.sum(t * np.log(q), axis=1)))
    return float(
        -np.mean(t * np.log(q) + (1.0 - t) * np.log(np.clip(1.0 - p, _LOG_EPS, 1.0)))
    )


def _output_delta(net: Network, p: np.ndarray, t: np.ndarray, loss: str) -> np.ndarray:
    """d(mean loss)/dz at the output layer, shape (n, n_out)."""
    n = p.shape[0]
    if loss == "cross-entropy":
        # identical simplification for softmax+one-hot and logsig+binary
        return (p - t) / n
    d = 2.0 * (p - t) / (n * p.shape[1])
    return d * activation_derivative(net.activations[-1], p)


def gradient(
    net: Network,
    states: np.ndarray,
    labels: np.ndarray,
    loss: str = "mse",
) -> tuple[list[np.ndarray], list[np.ndarray], float]:
    """Exact reverse-mode gradient of the mean loss over the batch.

    Returns (weight gradients, bias gradients, loss value).  The relu
    derivative at exactly 0 is taken as 0.
    """
    X = _check_batch(net, states, labels)
    _check_loss_for(net, loss)
    t = _targets(net, labels)
    outs = layer_outputs(net, X)
    p = outs[-1]
    if loss == "mse":
        value = float(np.mean((p - t) ** 2))
    else:
        q = np.clip(p, _LOG_EPS, 1.0)
        if net.activations[-1] == "softmax":
            value = float(-np.mean(np.sum(t * np.log(q), axis=1)))
        else:
            value = float(
                -np.mean(
                    t * np.log(q) + (1.0 - t) * np.log(np.clip(1.0 - p, _LOG_EPS, 1.0))
                )
            )
    delta = _output_delta(net, p, t, loss)
    n_layers = len(net.weights)
    grads_w: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    for layer in range(n_layers - 1, -1, -1):
        a_prev = outs[layer]
        grads_w[layer] = delta.T @ a_prev
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.weights[layer]) * activation_derivative(
                net.activations[layer - 1], outs[layer]
            )
    return grads_w, grads_b, value


def _flatten(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> np.ndarray:
    parts = []
    for w, b in zip(weights, biases):
        parts.append(np.ravel(w))
        parts.append(np.ravel(b))
    return np.concatenate(parts)


def _unflatten(vec: np.ndarray, net: Network) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights = []
    biases = []
    pos = 0
    for w, b in zip(net.weights, net.biases):
        weights.append(vec[pos : pos + w.size].reshape(w.shape))
        pos += w.size
        biases.append(vec[pos : pos + b.size].copy())
        pos += b.size
    return weights, biases


def _residual_jacobian(net: Network, X: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Residuals r = F - t and dr/dparams, parameter order matching _flatten."""
    outs = layer_outputs(net, X)
    p = outs[-1]
    r = (p - t).ravel()
    delta = activation_derivative(net.activations[-1], p)
    n = X.shape[0]
    blocks: list[tuple[np.ndarray, np.ndarray]] = []
    for layer in range(len(net.weights) - 1, -1, -1):
        a_prev = outs[layer]
        jw = np.einsum("ni,nj->nij", delta, a_prev).reshape(n, -1)
        blocks.append((jw, delta.copy()))
        if layer > 0:
            delta = (delta @ net.weights[layer]) * activation_derivative(
                net.activations[layer - 1], outs[layer]
            )
    cols = []
    for jw, jb in reversed(blocks):
        cols.append(jw)
        cols.append(jb)
    return r, np.hstack(cols)


def _train_lm(
    net: Network, X: np.ndarray, labels: np.ndarray, cfg: TrainConfig
) -> tuple[Network, TrainLog]:
    if net.activations[-1] == "softmax" or net.layer_sizes[-1] != 1:
        raise ConfigError(
            "levenberg-marquardt supports single-output networks with the mse loss;"
            " use the gradient algorithm for softmax networks"
        )
    if cfg.loss != "mse":
        raise ConfigError("levenberg-marquardt requires the mse loss")
    start = time.perf_counter()
    t = _targets(net, labels)
    n = X.shape[0]
    current = net
    mu = cfg.lm_mu_init
    losses = [loss_value(current, X, labels, "mse")]
    stop = "max_epochs"
    epoch = 0
    stale = 0
    while epoch < cfg.max_epochs:
        r, jac = _residual_jacobian(current, X, t)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(jac))):
            stop = "non-finite loss"
            break
        grad_vec = 2.0 * (jac.T @ r) / n
        if np.max(np.abs(grad_vec)) < _GRAD_TOL:
            stop = "gradient norm below tolerance"
            break
        jtj = jac.T @ jac
        params = _flatten(current.weights, current.biases)
        jtr = jac.T @ r
        accepted = False
        while mu <= _MU_MAX:
            a = jtj.copy()
            a[np.diag_indices_from(a)] += mu
            try:
                step = np.linalg.solve(a, -jtr)
            except np.linalg.LinAlgError:
                mu *= cfg.lm_mu_factor
                continue
            trial = current.with_parameters(*_unflatten(params + step, current))
            trial_loss = loss_value(trial, X, labels, "mse")
            if np.isfinite(trial_loss) and trial_loss < losses[-1]:
                current = trial
                losses.append(trial_loss)
                mu /= cfg.lm_mu_factor
                accepted = True
                break
            mu *= cfg.lm_mu_factor
        epoch += 1
        if not accepted:
            stop = "damping overflow"
            break
        if cfg.patience is not None:
            improved = losses[-1] < losses[-2] * (1.0 - 1e-12)
            stale = 0 if improved else stale + 1
            if stale >= cfg.patience:
                stop = "patience exhausted"
                break
    else:
        stop = "max_epochs"
    log = TrainLog(
        losses=tuple(losses),
        epochs=epoch,
        stop_reason=stop,
        mu_final=mu,
        elapsed_seconds=time.perf_counter() - start,
    )
    return current, log


def _train_sgd(
    net: Network, X: np.ndarray, labels: np.ndarray, cfg: TrainConfig
) -> tuple[Network, TrainLog]:
    start = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed))
    y = np.asarray(labels)
    n = X.shape[0]
    current = net
    losses = [loss_value(current, X, labels, cfg.loss)]
    best = current
    best_loss = losses[0]
    stop = "max_epochs"
    epoch = 0
    stale = 0
    while epoch < cfg.max_epochs:
        order = rng.permutation(n)
        weights = [w.copy() for w in current.weights]
        biases = [b.copy() for b in current.biases]
        working = current.with_parameters(weights, biases)
        aborted = False
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            gw, gb, _ = gradient(working, X[idx], y[idx], cfg.loss)
            for w, b, dw, db in zip(weights, biases, gw, gb):
                w -= cfg.learning_rate * dw
                b -= cfg.learning_rate * db
            if not all(np.all(np.isfinite(w)) for w in weights):
                aborted = True
                break
        epoch += 1
        if aborted:
            stop = "non-finite loss"
            break
        working = current.with_parameters(weights, biases)
        epoch_loss = loss_value(working, X, labels, cfg.loss)
        if not np.isfinite(epoch_loss):
            stop = "non-finite loss"
            break
        current = working
        losses.append(epoch_loss)
        if epoch_loss < best_loss:
            best = current
            best_loss = epoch_loss
            stale = 0
        else:
            stale += 1
        if cfg.patience is not None and stale >= cfg.patience:
            stop = "patience exhausted"
            break
    log = TrainLog(
        losses=tuple(losses),
        epochs=epoch,
        stop_reason=stop,
        mu_final=None,
        elapsed_seconds=time.perf_counter() - start,
    )
    return best, log


def train(
    net: Network,
    states: np.ndarray,
    labels: np.ndarray,
    cfg: Optional[TrainConfig] = None,
) -> tuple[Network, TrainLog]:
    """Train a network on labeled states; returns (trained net, log).

    The returned network's full-batch loss never exceeds the initial one:
    Levenberg-Marquardt only accepts improving steps, and gradient descent
    returns the best epoch snapshot.
    """
    if cfg is None:
        cfg = TrainConfig()
    X = _check_batch(net, states, labels)
    _check_loss_for(net, cfg.loss)
    if cfg.algorithm == "levenberg-marquardt":
        return _train_lm(net, X, labels, cfg)
    return _train_sgd(net, X, labels, cfg)


def adapt(
    net: Network,
    fn_states: np.ndarray,
    learning_rate: float,
    freeze_biases: bool = True,
) -> Network:
    """One incremental gradient step per sample, pulling each toward positive.

    fn_states are inputs the network wrongly classified negative although
    their true label is positive.  Each sample in order contributes a single
    gradient step with target 1 at the given rate; with freeze_biases only
    the weight matrices move.  An empty sample set returns the net unchanged.
    """
    if not learning_rate > 0.0:
        raise ConfigError(f"learning_rate must be > 0, got {learning_rate}")
    X = np.asarray(fn_states, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.size == 0:
        return net
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ContractError(
            f"fn_states must have shape (n, {net.input_dim}), got {X.shape}"
        )
    loss = "cross-entropy" if net.activations[-1] == "softmax" else "mse"
    current = net
    one = np.array([True])
    for row in X:
        gw, gb, _ = gradient(current, row[None, :], one, loss)
        weights = [w - learning_rate * dw for w, dw in zip(current.weights, gw)]
        if freeze_biases:
            biases = list(current.biases)
        else:
            biases = [b - learning_rate * db for b, db in zip(current.biases, gb)]
        current = current.with_parameters(weights, biases)
    return current
