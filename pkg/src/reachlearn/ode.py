"""Adaptive Dormand-Prince 5(4) integration, vectorized over a batch.

All routines advance N independent trajectories in lockstep: each lane has
its own state, step size and (via the caller) mode.  Per-lane arithmetic is
elementwise, so results are bit-identical whether a trajectory is run alone
or inside any batch.  The embedded 4th-order solution drives step-size
control with a scaled RMS error norm; a 4th-order interpolant provides
dense output inside accepted steps for grid sampling and event location.

Models are autonomous (no explicit time dependence), so right-hand sides
take only (mode, state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# Dormand-Prince 5(4) tableau.  The last row of A equals B (first-same-as-
# last), so stage 7 of an accepted step is stage 1 of the next.
A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
], dtype=np.float64)
B = np.array(
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    dtype=np.float64,
)
# error weights: 5th-order solution minus the embedded 4th-order one
E = np.array(
    [71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40],
    dtype=np.float64,
)
# dense-output coefficients: y(t + x*h) = y + h * sum_m x^(m+1) (K^T P)[:, m]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
], dtype=np.float64)

ORDER_EXPONENT = -1.0 / 5.0
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
SAFETY = 0.9


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and limits for adaptive integration.

    guard_tol is the time window within which jump instants are located;
    None resolves to 1e-9 * (integration horizon).  blowup_norm bounds the
    max-abs of any state component before a lane is declared blown up.
    """

    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    max_step: float = math.inf
    guard_tol: float | None = None
    max_internal_steps: int = 10_000_000
    blowup_norm: float = 1e8

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("rel_tol and abs_tol must be positive")
        if not self.max_step > 0:
            raise ConfigError("max_step must be positive")
        if self.guard_tol is not None and not self.guard_tol > 0:
            raise ConfigError("guard_tol must be positive")
        if self.max_internal_steps < 1:
            raise ConfigError("max_internal_steps must be >= 1")
        if not self.blowup_norm > 0:
            raise ConfigError("blowup_norm must be positive")


def batched_rhs(model):
    """Wrap a model's per-mode kernels into f(modes, Y) over lanes.

    modes is an int array (N,), Y is (N, n); lanes are grouped by mode so
    each kernel call is one vectorized evaluation.
    """

    def f(modes: np.ndarray, Y: np.ndarray) -> np.ndarray:
        if model.spec.mode_count == 1:
            with np.errstate(all="ignore"):
                return model.derivative_x(0, Y)
        out = np.empty_like(Y)
        with np.errstate(all="ignore"):
            for m in np.unique(modes):
                sel = modes == m
                out[sel] = model.derivative_x(int(m), Y[sel])
        return out

    return f


def rk_step(f, modes: np.ndarray, Y: np.ndarray, h: np.ndarray, K1: np.ndarray):
    """One trial step of size h per lane from Y.

    Returns (Y_new, K) with K shaped (7, N, n); K[0] is the supplied K1
    and K[6] = f(Y_new) (reusable as the next step's K1 on acceptance).
    """
    n_lanes, n = Y.shape
    K = np.empty((7, n_lanes, n), dtype=np.float64)
    K[0] = K1
    hcol = h[:, None]
    for s in range(1, 6):
        incr = np.einsum("j,jik->ik", A[s, :s], K[:s])
        K[s] = f(modes, Y + hcol * incr)
    Y_new = Y + hcol * np.einsum("j,jik->ik", B, K[:6])
    K[6] = f(modes, Y_new)
    return Y_new, K


def error_norm(Y: np.ndarray, Y_new: np.ndarray, K: np.ndarray,
               h: np.ndarray, rel_tol: float, abs_tol: float) -> np.ndarray:
    """Scaled RMS error per lane; non-finite trial states give +inf."""
    err = h[:, None] * np.einsum("j,jik->ik", E, K)
    scale = abs_tol + rel_tol * np.maximum(np.abs(Y), np.abs(Y_new))
    with np.errstate(all="ignore"):
        norm = np.sqrt(np.mean((err / scale) ** 2, axis=1))
    norm = np.where(np.isfinite(norm), norm, np.inf)
    norm = np.where(np.all(np.isfinite(Y_new), axis=1), norm, np.inf)
    return norm


def step_factor(err: np.ndarray) -> np.ndarray:
    """Step-size multiplier from the error norm, clipped to [0.2, 5]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = SAFETY * err ** ORDER_EXPONENT
    factor = np.where(err == 0.0, MAX_FACTOR, factor)
    factor = np.where(np.isfinite(factor), factor, MIN_FACTOR)
    return np.clip(factor, MIN_FACTOR, MAX_FACTOR)


def dense_coefficients(K: np.ndarray) -> np.ndarray:
    """Interpolant coefficients Q (N, n, 4) for a batch of accepted steps."""
    return np.einsum("jik,jm->ikm", K, P)


def dense_eval(Y: np.ndarray, h: np.ndarray, Q: np.ndarray,
               theta: np.ndarray) -> np.ndarray:
    """Evaluate the interpolant at fraction theta in [0, 1] of each step."""
    t = theta[:, None]
    poly = Q[..., 3]
    for m in (2, 1, 0):
        poly = poly * t + Q[..., m]
    return Y + (h * theta)[:, None] * poly


def initial_step(f, modes: np.ndarray, Y0: np.ndarray, horizon: float,
                 cfg: IntegratorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-lane starting step size (Hairer-Norsett-Wanner heuristic).

    Returns (h0, K1) so the first right-hand-side evaluation is reused.
    """
    F0 = f(modes, Y0)
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(Y0)
    with np.errstate(all="ignore"):
        d0 = np.sqrt(np.mean((Y0 / scale) ** 2, axis=1))
        d1 = np.sqrt(np.mean((F0 / scale) ** 2, axis=1))
    with np.errstate(all="ignore"):
        h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / d1)
    h0 = np.where(np.isfinite(h0), h0, 1e-6)
    Y1 = Y0 + h0[:, None] * F0
    F1 = f(modes, Y1)
    with np.errstate(all="ignore"):
        d2 = np.sqrt(np.mean(((F1 - F0) / scale) ** 2, axis=1)) / h0
        dmax = np.maximum(d1, d2)
        h1 = np.where(
            dmax <= 1e-15,
            np.maximum(1e-6, h0 * 1e-3),
            (0.01 / dmax) ** (1.0 / 5.0),
        )
    h = np.minimum(100.0 * h0, h1)
    h = np.minimum(h, min(cfg.max_step, horizon))
    h = np.where(np.isfinite(h) & (h > 0), h, 1e-6)
    return h, F0
