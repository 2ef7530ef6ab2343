"""Quadcopter altitude monitor with two vertical-thrust modes.

State is (wx, wy, wz, phi, theta, zdot, z): body angular rates, roll and
pitch, vertical velocity and altitude.  Yaw and horizontal position do not
affect the altitude property and are omitted.  Rotor speeds are constants
of the active mode: mode 0 runs rotors (1, 0, 1, 0), mode 1 runs
(0, 1, 0, 1).  Mode 0 hands over to mode 1 when the altitude crosses 500
upward; mode 1 hands back when it crosses 200 downward.  The unsafe set is
z <= 0 (crash).

The rotor thrust and drag enter the vertical dynamics through the tiny
coefficient kd, so vertical motion is gravity-dominated: mode 0 accelerates
at ~-g (falling or decelerating ballistic ascent) and mode 1 at ~+g.  The
angular subsystem is independent of altitude; with the rotor sets above the
roll/pitch arm terms vanish and only the yaw-rate torque differs by mode.

    wx' = (L*k*(w1^2 - w3^2) - (Iyy - Izz)*wy*wz) / Ixx
    wy' = (L*k*(w2^2 - w4^2) - (Izz - Ixx)*wx*wz) / Iyy
    wz' = (b*(w1^2 - w2^2 + w3^2 - w4^2) - (Ixx - Iyy)*wx*wy) / Izz
    phi'   = wx + sin(phi)*tan(theta)*wy + cos(phi)*tan(theta)*wz
    theta' = cos(phi)*wy - sin(phi)*wz
    zdot'  = -g + (cos(theta)*kd*(sum wi^2) + kd*zdot) / m    (mode 0)
    zdot'  = +g - (cos(theta)*kd*(sum wi^2) + kd*zdot) / m    (mode 1)
    z'     = zdot
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .base import HybridSystem, ModelSpec

# per-mode rotor-speed aggregates: (w1^2 - w3^2, w2^2 - w4^2,
# w1^2 - w2^2 + w3^2 - w4^2, sum of squares)
_ROTOR_TERMS = {
    0: (0.0, 0.0, 2.0, 2.0),   # rotors (1, 0, 1, 0)
    1: (0.0, 0.0, -2.0, 2.0),  # rotors (0, 1, 0, 1)
}


class Quadcopter(HybridSystem):

    def __init__(
        self,
        time_bound: float = 15.0,
        step: float = 0.05,
        arm_length: float = 0.23,
        thrust_coeff: float = 5.2,
        drag_coeff: float = 7.5e-7,
        mass: float = 0.65,
        torque_coeff: float = 3.13e-5,
        gravity: float = 9.8,
        inertia_x: float = 0.0075,
        inertia_y: float = 0.0075,
        inertia_z: float = 0.013,
    ):
        self.arm_length = float(arm_length)
        self.thrust_coeff = float(thrust_coeff)
        self.drag_coeff = float(drag_coeff)
        self.mass = float(mass)
        self.torque_coeff = float(torque_coeff)
        self.gravity = float(gravity)
        self.inertia = (float(inertia_x), float(inertia_y), float(inertia_z))
        self.spec = ModelSpec(
            name="quadcopter",
            dim=7,
            mode_count=2,
            var_names=("wx", "wy", "wz", "phi", "theta", "zdot", "z"),
            domain=np.array([
                [-0.05, 0.05],
                [0.0, 0.1],
                [-0.1, 0.1],
                [-0.2, 0.2],
                [-1.0, 0.4],
                [-150.0, 150.0],
                [50.0, 100.0],
            ]),
            default_time_bound=time_bound,
            default_step=step,
            params={
                "L": self.arm_length, "k": self.thrust_coeff,
                "kd": self.drag_coeff, "m": self.mass,
                "b": self.torque_coeff, "g": self.gravity,
                "Ixx": self.inertia[0], "Iyy": self.inertia[1],
                "Izz": self.inertia[2],
            },
        )

    def rotor_speeds(self, mode: int) -> tuple[float, float, float, float]:
        return (1.0, 0.0, 1.0, 0.0) if mode == 0 else (0.0, 1.0, 0.0, 1.0)

    def derivative_x(self, mode: int, x: np.ndarray) -> np.ndarray:
        d13, d24, dz_torque, total = _ROTOR_TERMS[mode]
        ixx, iyy, izz = self.inertia
        length, k = self.arm_length, self.thrust_coeff

        wx = x[..., 0]
        wy = x[..., 1]
        wz = x[..., 2]
        phi = x[..., 3]
        theta = x[..., 4]
        zdot = x[..., 5]

        sin_phi, cos_phi = np.sin(phi), np.cos(phi)
        tan_theta = np.tan(theta)
        cos_theta = np.cos(theta)

        out = np.empty_like(x)
        out[..., 0] = (length * k * d13 - (iyy - izz) * wy * wz) / ixx
        out[..., 1] = (length * k * d24 - (izz - ixx) * wx * wz) / iyy
        out[..., 2] = (self.torque_coeff * dz_torque - (ixx - iyy) * wx * wy) / izz
        out[..., 3] = wx + sin_phi * tan_theta * wy + cos_phi * tan_theta * wz
        out[..., 4] = cos_phi * wy - sin_phi * wz
        lift = (cos_theta * self.drag_coeff * total
                + self.drag_coeff * zdot) / self.mass
        if mode == 0:
            out[..., 5] = -self.gravity + lift
        else:
            out[..., 5] = self.gravity - lift
        out[..., 6] = zdot
        return out

    def guard_value_x(self, mode: int, x: np.ndarray) -> Optional[np.ndarray]:
        z = x[..., 6]
        return z - 500.0 if mode == 0 else 200.0 - z

    def guard_target(self, mode: int) -> Optional[int]:
        return 1 - mode

    def reset_x(self, mode: int, x: np.ndarray) -> tuple[int, np.ndarray]:
        return 1 - mode, x.copy()

    def unsafe_x(self, mode: int, x: np.ndarray) -> np.ndarray:
        return x[..., 6] <= 0.0
