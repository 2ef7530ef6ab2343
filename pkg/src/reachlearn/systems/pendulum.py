"""Inverted pendulum with a switched swing-up/balance controller.

Single mode, no jumps.  State is (theta, omega): pole angle from upright
and angular velocity.  The controller has four branches selected by the
switching function E = omega / 2 + cos(theta) - 1 and by proximity to
the upright position.  The unsafe set is |theta| > pi/4.
"""

from __future__ import annotations

import numpy as np

from ..errors import SingularityError
from .base import HybridSystem, ModelSpec, State

_COS_TINY = 1e-12


class InvertedPendulum(HybridSystem):

    def __init__(self, time_bound: float = 5.0, step: float = 0.01):
        self.spec = ModelSpec(
            name="pendulum",
            dim=2,
            mode_count=1,
            var_names=("theta", "omega"),
            domain=np.array([[-np.pi / 4, np.pi / 4], [-1.5, 1.5]]),
            default_time_bound=time_bound,
            default_step=step,
        )

    def control_input_x(self, x: np.ndarray, check: bool = False) -> np.ndarray:
        """Controller output, vectorized over rows of x = (theta, omega).

        With check=True a division by cos(theta) ~ 0 in the balance branch
        raises SingularityError; by default singular lanes silently produce
        non-finite values for the integrator to flag per lane.
        """
        theta = x[..., 0]
        omega = x[..., 1]
        energy = 0.5 * omega + (np.cos(theta) - 1.0)
        cos_t = np.cos(theta)
        mid_energy = (energy >= -1.0) & (energy <= 1.0)
        balance = mid_energy & (np.abs(omega) + np.abs(theta) <= 1.85)
        if check and np.any(balance & (np.abs(cos_t) < _COS_TINY)):
            raise SingularityError(
                "cos(theta) ~ 0 in the balance branch of the pendulum controller",
                term="cos(theta)",
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            u_balance = (2.0 * omega + theta + np.sin(theta)) / cos_t
            u_balance = np.where(np.abs(cos_t) < _COS_TINY, np.inf, u_balance)
        u_pump = omega / (1.0 + np.abs(omega)) * cos_t
        u = np.where(balance, u_balance, 0.0)
        u = np.where(energy < -1.0, u_pump, u)
        u = np.where(energy > 1.0, -u_pump, u)
        return u

    def control_input(self, s: State) -> float:
        self.check_state(s)
        return float(self.control_input_x(s.x[None, :], check=True)[0])

    def derivative_x(self, mode: int, x: np.ndarray) -> np.ndarray:
        theta = x[..., 0]
        omega = x[..., 1]
        u = self.control_input_x(x)
        out = np.empty_like(x)
        out[..., 0] = omega
        out[..., 1] = np.sin(theta) - np.cos(theta) * u
        return out

    def _derivative_single(self, mode: int, x: np.ndarray) -> np.ndarray:
        self.control_input_x(x[None, :], check=True)
        return self.derivative_x(mode, x[None, :])[0]

    def unsafe_x(self, mode: int, x: np.ndarray) -> np.ndarray:
        return np.abs(x[..., 0]) > np.pi / 4
