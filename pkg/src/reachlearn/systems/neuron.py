"""Spiking neuron (Izhikevich-style) with a spike-and-reset jump.

Single mode, one self-loop jump.  State is (v, u): membrane potential and
recovery variable.  A spike fires when v reaches 30; the reset snaps v to
the post-spike potential and bumps u.  The unsafe set is v <= -68.5,
i.e. the potential undershooting the resting band.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .base import HybridSystem, ModelSpec, State


class SpikingNeuron(HybridSystem):

    def __init__(
        self,
        time_bound: float = 20.0,
        step: float = 0.01,
        a: float = 0.02,
        b: float = 0.2,
        c: float = -65.0,
        d: float = 8.0,
        current: float = 40.0,
    ):
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)
        self.d = float(d)
        self.current = float(current)
        self.spec = ModelSpec(
            name="neuron",
            dim=2,
            mode_count=1,
            var_names=("v", "u"),
            domain=np.array([[-68.5, 30.0], [0.0, 25.0]]),
            default_time_bound=time_bound,
            default_step=step,
            params={"a": self.a, "b": self.b, "c": self.c, "d": self.d,
                    "I": self.current},
        )

    def derivative_x(self, mode: int, x: np.ndarray) -> np.ndarray:
        v = x[..., 0]
        u = x[..., 1]
        out = np.empty_like(x)
        out[..., 0] = 0.04 * v * v + 5.0 * v + 140.0 - u + self.current
        out[..., 1] = self.a * (self.b * v - u)
        return out

    def guard_value_x(self, mode: int, x: np.ndarray) -> Optional[np.ndarray]:
        return x[..., 0] - 30.0

    def guard_target(self, mode: int) -> Optional[int]:
        return 0

    def reset_x(self, mode: int, x: np.ndarray) -> tuple[int, np.ndarray]:
        out = x.copy()
        out[..., 0] = self.c
        out[..., 1] = x[..., 1] + self.d
        return 0, out

    def unsafe_x(self, mode: int, x: np.ndarray) -> np.ndarray:
        return x[..., 0] <= -68.5
