"""Shared model abstraction for deterministic hybrid systems.

A model is a finite set of modes, one ODE right-hand side per mode, and
optional guarded jumps between modes.  Guards are scalar functions of the
continuous state: a jump fires when the guard value crosses zero from below.
Resets are deterministic maps applied at the jump instant.

The per-mode kernels (`derivative_x`, `guard_value_x`, `reset_x`,
`unsafe_x`) are vectorized over a leading batch axis so the integrator can
advance many trajectories in lockstep.  The State-level wrappers operate on
a single (mode, x) pair and are the public face used by callers and tests.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..errors import ContractError


@dataclass(frozen=True)
class State:
    """A hybrid state: discrete mode plus continuous vector.

    The continuous part is stored as a read-only float64 array so states
    can be shared between threads and reused as dictionary keys in tests
    without defensive copies.
    """

    mode: int
    x: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=np.float64)
        if arr.ndim != 1:
            raise ContractError(f"state vector must be 1-d, got shape {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "x", arr)
        object.__setattr__(self, "mode", int(self.mode))

    def __eq__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return self.mode == other.mode and np.array_equal(self.x, other.x)

    def __hash__(self):
        return hash((self.mode, self.x.tobytes()))

    def __repr__(self):
        vals = ", ".join(repr(float(v)) for v in self.x)
        return f"State(mode={self.mode}, x=[{vals}])"


@dataclass(frozen=True)
class ModelSpec:
    """Static description of a model: dimensions, domain box, defaults."""

    name: str
    dim: int
    mode_count: int
    var_names: tuple[str, ...]
    domain: np.ndarray  # shape (dim, 2), inclusive bounds
    default_time_bound: float
    default_step: float
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        dom = np.asarray(self.domain, dtype=np.float64)
        if dom.shape != (self.dim, 2):
            raise ContractError(
                f"domain must have shape ({self.dim}, 2), got {dom.shape}"
            )
        if np.any(dom[:, 0] >= dom[:, 1]):
            raise ContractError("domain lower bounds must be < upper bounds")
        dom = dom.copy()
        dom.setflags(write=False)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "var_names", tuple(self.var_names))
        if len(self.var_names) != self.dim:
            raise ContractError("var_names length must equal dim")
        if self.mode_count < 1:
            raise ContractError("mode_count must be >= 1")
        if not (self.default_time_bound > 0):
            raise ContractError("default_time_bound must be positive")
        if not (0 < self.default_step <= self.default_time_bound):
            raise ContractError("default_step must be in (0, time bound]")
        object.__setattr__(self, "params", dict(self.params))


class HybridSystem(ABC):
    """Base class for the benchmark models."""

    spec: ModelSpec

    # -- vectorized kernels ------------------------------------------------

    @abstractmethod
    def derivative_x(self, mode: int, x: np.ndarray) -> np.ndarray:
        """Right-hand side of the mode's ODE, vectorized over rows of x."""

    def guard_value_x(self, mode: int, x: np.ndarray) -> Optional[np.ndarray]:
        """Signed guard value for the mode's outgoing jump, or None.

        Positive or zero means the guard is enabled.  Models without a
        jump in this mode return None.
        """
        return None

    def guard_target(self, mode: int) -> Optional[int]:
        """Mode entered when this mode's guard fires, or None."""
        return None

    def reset_x(self, mode: int, x: np.ndarray) -> tuple[int, np.ndarray]:
        """Apply the mode's reset map; returns (new_mode, new_x)."""
        raise ContractError(f"mode {mode} of {self.spec.name} has no reset")

    @abstractmethod
    def unsafe_x(self, mode: int, x: np.ndarray) -> np.ndarray:
        """Boolean membership of the unsafe set, vectorized over rows."""

    # -- State-level wrappers ----------------------------------------------

    def check_state(self, s: State) -> None:
        if not 0 <= s.mode < self.spec.mode_count:
            raise ContractError(
                f"mode {s.mode} out of range for {self.spec.name} "
                f"(mode_count={self.spec.mode_count})"
            )
        if s.x.shape != (self.spec.dim,):
            raise ContractError(
                f"state dimension {s.x.shape[0]} != {self.spec.dim} "
                f"declared by {self.spec.name}"
            )
        if not np.all(np.isfinite(s.x)):
            raise ContractError("state vector contains non-finite values")

    def derivative(self, s: State) -> np.ndarray:
        self.check_state(s)
        return self._derivative_single(s.mode, s.x)

    def _derivative_single(self, mode: int, x: np.ndarray) -> np.ndarray:
        """Single-state derivative; models with singular terms override
        this to raise SingularityError instead of returning non-finite
        values (the batched kernel stays silent so one bad lane cannot
        abort a whole batch)."""
        return self.derivative_x(mode, x[None, :])[0]

    def guard(self, s: State) -> Optional[int]:
        """Target mode if the state's outgoing guard is enabled, else None."""
        self.check_state(s)
        g = self.guard_value_x(s.mode, s.x[None, :])
        if g is None or g[0] < 0.0:
            return None
        return self.guard_target(s.mode)

    def reset(self, s: State) -> State:
        self.check_state(s)
        if self.guard(s) is None:
            raise ContractError("reset called while the jump guard is disabled")
        mode, x = self.reset_x(s.mode, s.x[None, :])
        return State(mode, x[0])

    def unsafe_contains(self, s: State) -> bool:
        self.check_state(s)
        return bool(self.unsafe_x(s.mode, s.x[None, :])[0])

    # -- convenience ---------------------------------------------------------

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def dim(self) -> int:
        return self.spec.dim

    def __repr__(self):
        return f"{type(self).__name__}(T={self.spec.default_time_bound}, h={self.spec.default_step})"
