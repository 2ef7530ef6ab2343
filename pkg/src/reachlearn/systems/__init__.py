"""Benchmark hybrid systems and the model registry."""

from __future__ import annotations

from typing import Any

from ..errors import ConfigError
from .base import HybridSystem, ModelSpec, State
from .neuron import SpikingNeuron
from .pendulum import InvertedPendulum
from .quadcopter import Quadcopter

_MODEL_CLASSES: dict[str, type[HybridSystem]] = {
    "pendulum": InvertedPendulum,
    "neuron": SpikingNeuron,
    "quadcopter": Quadcopter,
}


def available_models() -> tuple[str, ...]:
    return tuple(sorted(_MODEL_CLASSES))


def get_model(
    name: str,
    time_bound: float | None = None,
    step: float | None = None,
    params: dict[str, Any] | None = None,
) -> HybridSystem:
    """Instantiate a benchmark model by name with optional overrides.

    `params` override the model's named constants (see each class for the
    accepted keyword names).  Unknown model names and unknown parameter
    names raise ConfigError.
    """
    try:
        cls = _MODEL_CLASSES[name]
    except KeyError:
        raise ConfigError(
            f"unknown model {name!r}; available: {', '.join(available_models())}"
        ) from None
    kwargs: dict[str, Any] = dict(params or {})
    if time_bound is not None:
        kwargs["time_bound"] = time_bound
    if step is not None:
        kwargs["step"] = step
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for model {name!r}: {exc}") from None


__all__ = [
    "HybridSystem",
    "ModelSpec",
    "State",
    "InvertedPendulum",
    "SpikingNeuron",
    "Quadcopter",
    "available_models",
    "get_model",
]
