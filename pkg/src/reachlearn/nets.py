"""Fully connected feedforward classifier networks on numpy.

A network normalizes its raw input to [-1, 1] per axis, applies a chain of
affine layers with elementwise activations, and reads the final score as a
probability of the positive class.  Classification compares that score to a
threshold (default 0.5).

Networks are immutable values: training and adaptation return new instances
and inference is safe to share across threads.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, ParseError

__all__ = [
    "ACTIVATIONS",
    "ARCHITECTURES",
    "Ensemble",
    "Network",
    "activation",
    "activation_derivative",
    "architecture",
    "build_ensemble",
    "build_network",
    "classify",
    "forward",
    "init_nguyen_widrow",
    "load_model",
    "normalize",
    "save_model",
]

ACTIVATIONS = ("tansig", "logsig", "relu", "softmax")

# name -> (hidden sizes, hidden activation, output activation)
# deep sigmoid, deep relu with a 2-way softmax head, and a shallow net
ARCHITECTURES = {
    "dnn-s": ((10, 10, 10), "tansig", "logsig"),
    "dnn-r": ((10, 10, 10), "relu", "softmax"),
    "snn": ((20,), "tansig", "logsig"),
}


@dataclass(frozen=True, eq=False)
class Network:
    """Weights, biases, activation tags, input bounds, and a threshold.

    layer_sizes is (n_0, ..., n_l); weights[i] has shape (n_{i+1}, n_i) and
    biases[i] has length n_{i+1}.  A softmax output has exactly two units
    and the score is its first (positive-class) component.
    """

    layer_sizes: Tuple[int, ...]
    activations: Tuple[str, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    x_min: np.ndarray
    x_max: np.ndarray
    threshold: float = 0.5

    def __post_init__(self) -> None:
        sizes = tuple(int(n) for n in self.layer_sizes)
        acts = tuple(self.activations)
        if len(sizes) < 2:
            raise ConfigError("a network needs at least input and output layers")
        if any(n < 1 for n in sizes):
            raise ConfigError(f"layer sizes must be positive, got {sizes}")
        if len(acts) != len(sizes) - 1:
            raise ConfigError("need one activation tag per non-input layer")
        for i, tag in enumerate(acts):
            if tag not in ACTIVATIONS:
                raise ConfigError(f"unknown activation tag {tag!r}")
            if tag == "softmax" and i != len(acts) - 1:
                raise ConfigError("softmax is allowed on the output layer only")
        if acts[-1] == "softmax" and sizes[-1] != 2:
            raise ConfigError("softmax output must have exactly 2 units")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")

        # own private copies so freezing them never locks caller buffers
        weights = tuple(np.array(w, dtype=np.float64, order="C") for w in self.weights)
        biases = tuple(np.array(b, dtype=np.float64, order="C") for b in self.biases)
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ConfigError("need one weight matrix and bias vector per layer")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[i + 1], sizes[i]):
                raise ConfigError(
                    f"layer {i} weights must have shape {(sizes[i + 1], sizes[i])},"
                    f" got {w.shape}"
                )
            if b.shape != (sizes[i + 1],):
                raise ConfigError(
                    f"layer {i} biases must have shape ({sizes[i + 1]},), got {b.shape}"
                )
        x_min = np.array(self.x_min, dtype=np.float64, order="C")
        x_max = np.array(self.x_max, dtype=np.float64, order="C")
        if x_min.shape != (sizes[0],) or x_max.shape != (sizes[0],):
            raise ConfigError("normalization bounds must have input dimension")
        if not np.all(x_min < x_max):
            raise ConfigError("normalization bounds must satisfy x_min < x_max per axis")
        for arr in (*weights, *biases, x_min, x_max):
            arr.flags.writeable = False
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "x_min", x_min)
        object.__setattr__(self, "x_max", x_max)
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def with_parameters(
        self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]
    ) -> "Network":
        return replace(self, weights=tuple(weights), biases=tuple(biases))

    def with_threshold(self, threshold: float) -> "Network":
        return replace(self, threshold=threshold)


@dataclass(frozen=True)
class Ensemble:
    """Majority vote over an odd number of member networks."""

    members: Tuple[Network, ...]

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if len(members) < 1 or len(members) % 2 == 0:
            raise ConfigError("ensembles need an odd number of members")
        dims = {m.input_dim for m in members}
        if len(dims) != 1:
            raise ConfigError("ensemble members must share the input dimension")
        object.__setattr__(self, "members", members)

    @property
    def input_dim(self) -> int:
        return self.members[0].input_dim


def activation(tag: str, z: np.ndarray) -> np.ndarray:
    """Elementwise activation; softmax normalizes along the last axis."""
    if tag == "tansig":
        return np.tanh(z)  # identical to 2/(1+exp(-2z)) - 1
    if tag == "logsig":
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "softmax":
        shifted = z - z.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    raise ConfigError(f"unknown activation tag {tag!r}")


def activation_derivative(tag: str, out: np.ndarray) -> np.ndarray:
    """Derivative expressed through the activation output.

    relu uses the convention derivative(0) = 0.  softmax has no elementwise
    derivative; its Jacobian is handled where the loss is.
    """
    if tag == "tansig":
        return 1.0 - out * out
    if tag == "logsig":
        return out * (1.0 - out)
    if tag == "relu":
        return (out > 0.0).astype(np.float64)
    raise ConfigError(f"no elementwise derivative for activation {tag!r}")


def normalize(net: Network, x: np.ndarray) -> np.ndarray:
    """Map raw inputs to [-1, 1] per axis; out-of-bound inputs extrapolate."""
    x = np.asarray(x, dtype=np.float64)
    return -1.0 + 2.0 * (x - net.x_min) / (net.x_max - net.x_min)


def layer_outputs(net: Network, x: np.ndarray) -> list[np.ndarray]:
    """All layer outputs for a batch, starting with the normalized input."""
    x = np.asarray(x, dtype=np.float64)
    a = normalize(net, np.atleast_2d(x))
    outs = [a]
    for w, b, tag in zip(net.weights, net.biases, net.activations):
        a = activation(tag, a @ w.T + b)
        outs.append(a)
    return outs


def forward(net: Network, x: np.ndarray) -> Union[float, np.ndarray]:
    """Classifier score in [0, 1]; scalar for a single input row."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    out = layer_outputs(net, x)[-1]
    score = out[:, 0]
    return float(score[0]) if single else score


def classify(
    net: Union[Network, Ensemble], x: np.ndarray
) -> Union[bool, np.ndarray]:
    """Positive iff the score reaches the threshold; majority for ensembles."""
    if isinstance(net, Ensemble):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        votes = np.stack([classify(m, np.atleast_2d(x)) for m in net.members])
        decision = votes.sum(axis=0) * 2 > len(net.members)
        return bool(decision[0]) if single else decision
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    score = forward(net, np.atleast_2d(x))
    decision = score >= net.threshold
    return bool(decision[0]) if single else decision


def vote_fraction(ens: Ensemble, x: np.ndarray) -> np.ndarray:
    """Fraction of members voting positive, per input row."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    votes = np.stack([classify(m, x) for m in ens.members])
    return votes.mean(axis=0)


def init_nguyen_widrow(
    layer_sizes: Sequence[int],
    activations: Sequence[str],
    x_min: np.ndarray,
    x_max: np.ndarray,
    seed: int = 0,
    threshold: float = 0.5,
) -> Network:
    """Deterministic layer initialization with scaled row norms.

    Every weight row is a random direction scaled to 0.7 * n^(1/n_prev)
    where n is the layer's unit count and n_prev its input count; biases
    spread the unit centers evenly across the active input range.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    weights = []
    biases = []
    sizes = tuple(int(n) for n in layer_sizes)
    for n_prev, n in zip(sizes[:-1], sizes[1:]):
        beta = 0.7 * n ** (1.0 / n_prev)
        rows = rng.uniform(-1.0, 1.0, size=(n, n_prev))
        norms = np.linalg.norm(rows, axis=1)
        norms[norms == 0.0] = 1.0
        w = beta * rows / norms[:, None]
        if n == 1:
            b = np.zeros(1)
        else:
            signs = np.where(w[:, 0] >= 0.0, 1.0, -1.0)
            b = beta * np.linspace(-1.0, 1.0, n) * signs
        weights.append(w)
        biases.append(b)
    return Network(
        layer_sizes=sizes,
        activations=tuple(activations),
        weights=tuple(weights),
        biases=tuple(biases),
        x_min=np.asarray(x_min, dtype=np.float64),
        x_max=np.asarray(x_max, dtype=np.float64),
        threshold=threshold,
    )


def architecture(name: str, input_dim: int) -> tuple[Tuple[int, ...], Tuple[str, ...]]:
    """Layer sizes and activation tags for a named architecture."""
    key = name.lower()
    if key not in ARCHITECTURES:
        raise ConfigError(
            f"unknown architecture {name!r}; choose from {sorted(ARCHITECTURES)}"
        )
    hidden, hidden_act, out_act = ARCHITECTURES[key]
    out_units = 2 if out_act == "softmax" else 1
    sizes = (int(input_dim), *hidden, out_units)
    acts = (hidden_act,) * len(hidden) + (out_act,)
    return sizes, acts


def build_network(
    arch: str,
    x_min: np.ndarray,
    x_max: np.ndarray,
    seed: int = 0,
    threshold: float = 0.5,
) -> Network:
    """Named architecture with scaled random initialization."""
    x_min = np.asarray(x_min, dtype=np.float64)
    sizes, acts = architecture(arch, x_min.shape[0])
    return init_nguyen_widrow(sizes, acts, x_min, x_max, seed=seed, threshold=threshold)


_ENSEMBLE_KINDS = {
    "ens1": ("dnn-s",) * 5,
    "ens2": ("dnn-s", "dnn-s", "dnn-s", "dnn-r", "dnn-r"),
}


def build_ensemble(
    kind: str, x_min: np.ndarray, x_max: np.ndarray, seed: int = 0
) -> Ensemble:
    """Five-member ensembles: all-sigmoid (ens1) or mixed (ens2)."""
    key = kind.lower()
    if key not in _ENSEMBLE_KINDS:
        raise ConfigError(f"unknown ensemble kind {kind!r}; choose from {sorted(_ENSEMBLE_KINDS)}")
    seq = np.random.SeedSequence(entropy=seed)
    member_seeds = [int(s.generate_state(1)[0]) for s in seq.spawn(5)]
    members = tuple(
        build_network(arch, x_min, x_max, seed=s)
        for arch, s in zip(_ENSEMBLE_KINDS[key], member_seeds)
    )
    return Ensemble(members)


def _net_payload(net: Network) -> dict:
    return {
        "kind": "network",
        "layer_sizes": list(net.layer_sizes),
        "activations": list(net.activations),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "x_min": net.x_min.tolist(),
        "x_max": net.x_max.tolist(),
        "threshold": net.threshold,
    }


def save_model(net: Union[Network, Ensemble], path: Union[str, os.PathLike]) -> None:
    """Write a network or ensemble as versioned JSON (bit-exact floats)."""
    if isinstance(net, Ensemble):
        payload = {
            "schema": 1,
            "kind": "ensemble",
            "members": [_net_payload(m) for m in net.members],
        }
    else:
        payload = {"schema": 1, **_net_payload(net)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def _net_from_payload(obj: dict, path: str) -> Network:
    try:
        return Network(
            layer_sizes=tuple(obj["layer_sizes"]),
            activations=tuple(obj["activations"]),
            weights=tuple(np.array(w, dtype=np.float64) for w in obj["weights"]),
            biases=tuple(np.array(b, dtype=np.float64) for b in obj["biases"]),
            x_min=np.array(obj["x_min"], dtype=np.float64),
            x_max=np.array(obj["x_max"], dtype=np.float64),
            threshold=float(obj["threshold"]),
        )
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise ParseError(f"invalid model payload: {exc}", str(path), 0) from None


def load_model(path: Union[str, os.PathLike]) -> Union[Network, Ensemble]:
    """Read a model written by save_model."""
    path_str = os.fspath(path)
    try:
        with open(path_str, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}", path_str, exc.lineno) from None
    if not isinstance(obj, dict) or obj.get("schema") != 1:
        raise ParseError(
            f"unsupported model schema {obj.get('schema') if isinstance(obj, dict) else obj!r}",
            path_str,
            0,
        )
    if obj.get("kind") == "ensemble":
        return Ensemble(tuple(_net_from_payload(m, path_str) for m in obj["members"]))
    return _net_from_payload(obj, path_str)
