"""Trajectory simulation and time-bounded reachability labels.

A trace is the sequence of states at the grid times 0, h, 2h, ..., kh with
k = floor(T/h); grid states come from dense interpolation of the adaptive
integrator, so the solver never needs to land on grid times.  Jumps are
located by bisection on the dense output to within guard_tol and the
integration restarts from the post-reset state.

Reachability labels have two modes.  Grid mode checks membership of the
unsafe set at grid states only, which matches the fixed-grid trace
definition.  Strict mode (the default) additionally checks every internal
accepted solver step and both endpoints of every jump; the extra checks
only ever move a label toward "reachable".

The driver advances many initial states in lockstep with per-lane adaptive
steps.  Per-lane arithmetic is elementwise, so labels and traces are
bit-identical no matter how states are batched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ode
from .errors import (
    BlowUpError,
    ContractError,
    DivergenceError,
    SingularityError,
)
from .ode import IntegratorConfig
from .systems.base import HybridSystem, State

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_DIVERGED = 2

_CHAIN_LIMIT = 100  # max same-instant jumps before declaring a livelock
_BISECT_LIMIT = 200


@dataclass(frozen=True)
class Jump:
    """One guard crossing: time, state at the guard, state after reset."""

    time: float
    pre: State
    post: State


@dataclass
class SimTrace:
    """Grid-sampled trajectory with jump records.

    Grid states are sampled left-continuously: at a jump instant that
    falls exactly on a grid time, the recorded state is the pre-jump one
    (the jump itself carries both endpoints).  A trace that could not be
    completed is flagged partial with the cause; its arrays stop at the
    last grid point that was reached.
    """

    model: str
    time_bound: float
    step: float
    times: np.ndarray          # (m,)
    modes: np.ndarray          # (m,) int
    grid: np.ndarray           # (m, dim)
    jumps: list[Jump] = field(default_factory=list)
    partial: bool = False
    failure_cause: str | None = None

    def __post_init__(self):
        if len(self.times) != len(self.grid) or len(self.times) != len(self.modes):
            raise ContractError("trace arrays must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ContractError("trace times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def state_at(self, j: int) -> State:
        return State(int(self.modes[j]), self.grid[j])

    @property
    def states(self) -> list[State]:
        return [self.state_at(j) for j in range(len(self))]


def grid_count(time_bound: float, step: float) -> int:
    """Number of grid intervals k = floor(T/h), guarded against the float
    quotient landing a hair below an integer."""
    if not (time_bound > 0 and step > 0):
        raise ContractError("time bound and step must be positive")
    q = time_bound / step
    return int(math.floor(q + 1e-9 * max(q, 1.0)))


def _resolve_guard_tol(cfg: IntegratorConfig, horizon: float) -> float:
    if cfg.guard_tol is not None:
        return cfg.guard_tol
    return 1e-9 * max(horizon, np.finfo(np.float64).tiny)


def _guard_values(model: HybridSystem, modes: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Signed guard values per lane; lanes whose mode has no guard get -inf."""
    out = np.full(len(Y), -np.inf)
    for m in np.unique(modes):
        g = model.guard_value_x(int(m), Y[modes == m])
        if g is not None:
            out[modes == m] = g
    return out


def _unsafe_values(model: HybridSystem, modes: np.ndarray, Y: np.ndarray) -> np.ndarray:
    out = np.zeros(len(Y), dtype=bool)
    for m in np.unique(modes):
        sel = modes == m
        out[sel] = model.unsafe_x(int(m), Y[sel])
    return out


def _apply_reset(model: HybridSystem, modes: np.ndarray, Y: np.ndarray):
    new_modes = modes.copy()
    new_Y = Y.copy()
    for m in np.unique(modes):
        sel = modes == m
        tgt, xr = model.reset_x(int(m), Y[sel])
        new_modes[sel] = tgt
        new_Y[sel] = xr
    return new_modes, new_Y


def _has_guards(model: HybridSystem) -> bool:
    return any(
        model.guard_target(m) is not None for m in range((model.spec.mode_count))
    )


class _DriveResult:
    """Raw per-lane outcome of a batched drive."""

    __slots__ = ("labels", "status", "fail_time", "fail_state",
                 "grid", "grid_modes", "grid_filled", "jumps")

    def __init__(self, n_lanes):
        self.labels = np.zeros(n_lanes, dtype=bool)
        self.status = np.zeros(n_lanes, dtype=np.uint8)
        self.fail_time = np.full(n_lanes, np.nan)
        self.fail_state: dict[int, State] = {}
        self.grid = None
        self.grid_modes = None
        self.grid_filled = None
        self.jumps: list[list[Jump]] | None = None


def _drive(
    model: HybridSystem,
    X0: np.ndarray,
    modes0: np.ndarray,
    time_bound: float,
    h_grid: float,
    cfg: IntegratorConfig,
    want_trace: bool,
    strict: bool,
) -> _DriveResult:
    n_lanes, dim = X0.shape
    k = grid_count(time_bound, h_grid)
    t_end = k * h_grid
    guard_tol = _resolve_guard_tol(cfg, t_end)
    f = ode.batched_rhs(model)
    guarded = _has_guards(model)

    res = _DriveResult(n_lanes)
    if want_trace:
        res.grid = np.full((n_lanes, k + 1, dim), np.nan)
        res.grid_modes = np.zeros((n_lanes, k + 1), dtype=np.int32)
        res.jumps = [[] for _ in range(n_lanes)]

    X = np.array(X0, dtype=np.float64)
    M = np.array(modes0, dtype=np.int64)

    # grid point 0 is the initial state itself
    res.labels |= _unsafe_values(model, M, X)
    if want_trace:
        res.grid[:, 0] = X
        res.grid_modes[:, 0] = M

    # jumps enabled already at t = 0 fire before any integration
    if guarded:
        for _ in range(_CHAIN_LIMIT):
            g_now = _guard_values(model, M, X)
            fire = g_now >= 0.0
            if not np.any(fire):
                break
            sub = np.flatnonzero(fire)
            m_new, x_new = _apply_reset(model, M[sub], X[sub])
            if want_trace:
                for j, lane in enumerate(sub):
                    res.jumps[lane].append(Jump(
                        0.0, State(int(M[lane]), X[lane]),
                        State(int(m_new[j]), x_new[j]),
                    ))
            if strict:
                res.labels[sub] |= _unsafe_values(model, m_new, x_new)
            M[sub] = m_new
            X[sub] = x_new
        else:
            still = np.flatnonzero(_guard_values(model, M, X) >= 0.0)
            res.status[still] = STATUS_DIVERGED
            res.fail_time[still] = 0.0

    # active lanes, stored compressed
    if want_trace:
        undecided = res.status == STATUS_OK
    else:
        undecided = (res.status == STATUS_OK) & ~res.labels
    idx = np.flatnonzero(undecided)
    X = X[idx]
    M = M[idx]
    t = np.zeros(len(idx))
    grid_next = np.ones(len(idx), dtype=np.int64)
    steps = np.zeros(len(idx), dtype=np.int64)
    h, K1 = ode.initial_step(f, M, X, t_end, cfg)
    g0 = _guard_values(model, M, X) if guarded else None

    while len(idx) > 0:
        h_try = np.minimum(h, t_end - t)
        Y_new, K = ode.rk_step(f, M, X, h_try, K1)
        err = ode.error_norm(X, Y_new, K, h_try, cfg.rel_tol, cfg.abs_tol)
        steps += 1
        h_next = np.minimum(h_try * ode.step_factor(err), cfg.max_step)

        newfail = np.zeros(len(idx), dtype=np.uint8)
        over = steps > cfg.max_internal_steps
        newfail[over] = STATUS_DIVERGED
        acc = (err <= 1.0) & (newfail == 0)

        # error control collapsing to zero step means non-finite dynamics
        stuck = ~acc & (newfail == 0) & (h_next < 1e-15 * np.maximum(np.abs(t), 1.0))
        newfail[stuck] = STATUS_BLOWUP

        a = np.flatnonzero(acc)
        if len(a) > 0:
            grown = np.max(np.abs(Y_new[a]), axis=1) > cfg.blowup_norm
            newfail[a[grown]] = STATUS_BLOWUP
            a = a[~grown]

        if len(a) > 0:
            Ka = K[:, a]
            Q = ode.dense_coefficients(Ka)
            t0a = t[a]
            ha = h_try[a]
            t_stop = t0a + ha

            ev = np.zeros(len(a), dtype=bool)
            if guarded:
                g1 = _guard_values(model, M[a], Y_new[a])
                ev = g1 >= 0.0
                if np.any(ev):
                    e = np.flatnonzero(ev)
                    lo = np.zeros(len(e))
                    hi = np.ones(len(e))
                    span = ha[e]
                    for _ in range(_BISECT_LIMIT):
                        need = (hi - lo) * span > guard_tol
                        if not np.any(need):
                            break
                        mid = 0.5 * (lo + hi)
                        ym = ode.dense_eval(X[a[e]], span, Q[e], mid)
                        ge = _guard_values(model, M[a[e]], ym) >= 0.0
                        hi = np.where(need & ge, mid, hi)
                        lo = np.where(need & ~ge, mid, lo)
                    theta_star = hi
                    t_stop[e] = t0a[e] + theta_star * span

            # all grid times inside each lane's accepted span, flattened
            j_max = np.minimum(
                k, np.floor(t_stop / h_grid + 1e-6).astype(np.int64)
            )
            counts = np.maximum(j_max - grid_next[a] + 1, 0)
            total = int(counts.sum())
            if total > 0:
                lane = np.repeat(np.arange(len(a)), counts)
                offs = np.arange(total) - np.repeat(
                    np.cumsum(counts) - counts, counts
                )
                j = grid_next[a][lane] + offs
                theta_g = np.clip((j * h_grid - t0a[lane]) / ha[lane], 0.0, 1.0)
                yg = ode.dense_eval(X[a][lane], ha[lane], Q[lane], theta_g)
                mg = M[a][lane]
                if want_trace:
                    res.grid[idx[a][lane], j] = yg
                    res.grid_modes[idx[a][lane], j] = mg
                else:
                    hit = _unsafe_values(model, mg, yg)
                    if np.any(hit):
                        np.logical_or.at(res.labels, idx[a][lane], hit)
                grid_next[a] += counts

            if strict and not want_trace:
                nev = np.flatnonzero(~ev)
                if len(nev) > 0:
                    res.labels[idx[a[nev]]] |= _unsafe_values(
                        model, M[a[nev]], Y_new[a[nev]]
                    )

            # fire events: jump at t*, reset, restart from the new state
            if np.any(ev):
                e = np.flatnonzero(ev)
                sub = a[e]
                y_star = ode.dense_eval(X[sub], ha[e], Q[e], theta_star)
                t_star = t_stop[e]
                if strict and not want_trace:
                    res.labels[idx[sub]] |= _unsafe_values(model, M[sub], y_star)
                m_new, x_new = _apply_reset(model, M[sub], y_star)
                if want_trace:
                    for jj, lane in enumerate(sub):
                        res.jumps[idx[lane]].append(Jump(
                            float(t_star[jj]),
                            State(int(M[lane]), y_star[jj]),
                            State(int(m_new[jj]), x_new[jj]),
                        ))
                if strict and not want_trace:
                    res.labels[idx[sub]] |= _unsafe_values(model, m_new, x_new)
                g_new = _guard_values(model, m_new, x_new)
                for _ in range(_CHAIN_LIMIT):
                    again = g_new >= 0.0
                    if not np.any(again):
                        break
                    ag = np.flatnonzero(again)
                    m2, x2 = _apply_reset(model, m_new[ag], x_new[ag])
                    if want_trace:
                        for pos, jj in enumerate(ag):
                            res.jumps[idx[sub[jj]]].append(Jump(
                                float(t_star[jj]),
                                State(int(m_new[jj]), x_new[jj]),
                                State(int(m2[pos]), x2[pos]),
                            ))
                    if strict and not want_trace:
                        res.labels[idx[sub[ag]]] |= _unsafe_values(model, m2, x2)
                    m_new[ag] = m2
                    x_new[ag] = x2
                    g_new = _guard_values(model, m_new, x_new)
                else:
                    live = np.flatnonzero(g_new >= 0.0)
                    newfail[sub[live]] = STATUS_DIVERGED

                M[sub] = m_new
                X[sub] = x_new
                t[sub] = t_star
                K1[sub] = f(m_new, x_new)
                if guarded:
                    g0[sub] = g_new

            nev = a[~ev]
            X[nev] = Y_new[nev]
            t[nev] = t_stop[~ev]
            K1[nev] = K[6, nev]
            if guarded:
                g0[nev] = g1[~ev]

        h = h_next

        # book failures, then drop decided lanes
        failed = np.flatnonzero(newfail)
        for lane in failed:
            res.status[idx[lane]] = newfail[lane]
            res.fail_time[idx[lane]] = t[lane]
            res.fail_state[int(idx[lane])] = State(int(M[lane]), X[lane])

        keep = newfail == 0
        keep &= grid_next <= k
        if not want_trace:
            keep &= ~res.labels[idx]
        if not np.all(keep):
            idx = idx[keep]
            X = X[keep]
            M = M[keep]
            t = t[keep]
            h = h[keep]
            K1 = K1[keep]
            steps = steps[keep]
            grid_next = grid_next[keep]
            if guarded:
                g0 = g0[keep]

    if want_trace:
        res.grid_filled = np.full(n_lanes, k + 1, dtype=np.int64)
        for lane, st in enumerate(res.status):
            if st != STATUS_OK:
                filled = int(np.max(np.flatnonzero(
                    np.all(np.isfinite(res.grid[lane]), axis=1)
                ))) + 1 if np.any(np.all(np.isfinite(res.grid[lane]), axis=1)) else 0
                res.grid_filled[lane] = filled
    return res


def _failure_error(model, status, fail_time, fail_state):
    """Map a lane failure to a typed exception, probing for singularities."""
    t_fail = float(fail_time)
    if status == STATUS_DIVERGED:
        return DivergenceError(
            f"{model.name}: exceeded max internal steps near t={t_fail:.6g}"
        )
    if fail_state is not None:
        try:
            model.derivative(fail_state)
        except SingularityError as exc:
            return SingularityError(str(exc), term=exc.term, time=t_fail)
        except Exception:
            pass
    return BlowUpError(
        f"{model.name}: state or derivative became non-finite near t={t_fail:.6g}",
        last_valid_time=t_fail,
    )


def label_states(
    model: HybridSystem,
    states: np.ndarray,
    modes: np.ndarray | int = 0,
    time_bound: float | None = None,
    step: float | None = None,
    cfg: IntegratorConfig | None = None,
    strict: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Reachability labels for a batch of initial states.

    Returns (labels, status); lanes with nonzero status could not be
    simulated and their label is meaningless.  This is the lenient bulk
    API used by dataset generation; reach_label raises instead.
    """
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[1] != model.spec.dim:
        raise ContractError(
            f"states must have shape (N, {model.spec.dim}), got {states.shape}"
        )
    if not np.all(np.isfinite(states)):
        raise ContractError("states must be finite")
    T = model.spec.default_time_bound if time_bound is None else float(time_bound)
    h = model.spec.default_step if step is None else float(step)
    cfg = cfg or IntegratorConfig()
    mode_arr = np.broadcast_to(np.asarray(modes, dtype=np.int64), states.shape[:1])
    if np.any((mode_arr < 0) | (mode_arr >= model.spec.mode_count)):
        raise ContractError("mode out of range")
    res = _drive(model, states, mode_arr.copy(), T, h, cfg,
                 want_trace=False, strict=strict)
    return res.labels, res.status


def reach_label(
    model: HybridSystem,
    s0: State,
    time_bound: float | None = None,
    step: float | None = None,
    cfg: IntegratorConfig | None = None,
    strict: bool = True,
) -> bool:
    """Whether the trajectory from s0 reaches the unsafe set by the bound.

    A trajectory that cannot be simulated to the bound without hitting the
    unsafe set first raises; an unreachable verdict requires the full
    horizon.
    """
    model.check_state(s0)
    labels, status = label_states(
        model, s0.x[None, :], np.array([s0.mode]), time_bound, step, cfg, strict
    )
    if labels[0]:
        return True
    if status[0] != STATUS_OK:
        T = model.spec.default_time_bound if time_bound is None else time_bound
        h = model.spec.default_step if step is None else step
        cfg2 = cfg or IntegratorConfig()
        res = _drive(model, s0.x[None, :], np.array([s0.mode]), T, h, cfg2,
                     want_trace=False, strict=strict)
        raise _failure_error(model, res.status[0], res.fail_time[0],
                             res.fail_state.get(0))
    return False


def simulate(
    model: HybridSystem,
    s0: State,
    time_bound: float | None = None,
    step: float | None = None,
    cfg: IntegratorConfig | None = None,
) -> SimTrace:
    """Full grid trace from s0; partial (flagged) if integration fails."""
    model.check_state(s0)
    T = model.spec.default_time_bound if time_bound is None else float(time_bound)
    h = model.spec.default_step if step is None else float(step)
    cfg = cfg or IntegratorConfig()
    res = _drive(model, s0.x[None, :], np.array([s0.mode]), T, h, cfg,
                 want_trace=True, strict=False)
    filled = int(res.grid_filled[0])
    k = grid_count(T, h)
    m = k + 1 if res.status[0] == STATUS_OK else filled
    cause = None
    if res.status[0] != STATUS_OK:
        cause = str(_failure_error(model, res.status[0], res.fail_time[0],
                                   res.fail_state.get(0)))
    times = np.arange(m) * h
    return SimTrace(
        model=model.name,
        time_bound=T,
        step=h,
        times=times,
        modes=res.grid_modes[0, :m].copy(),
        grid=res.grid[0, :m].copy(),
        jumps=res.jumps[0],
        partial=res.status[0] != STATUS_OK,
        failure_cause=cause,
    )


def trace_label(model: HybridSystem, trace: SimTrace) -> bool:
    """Grid-mode label recomputed from a stored trace."""
    return bool(np.any(_unsafe_values(model, trace.modes, trace.grid)))


def integrate_segment(
    model: HybridSystem,
    s: State,
    t0: float,
    t1: float,
    cfg: IntegratorConfig | None = None,
) -> tuple[State, list[tuple[float, State]]]:
    """Advance the continuous dynamics from t0 to t1 within one mode.

    No guard handling: the caller is responsible for events.  Returns the
    state at t1 and the list of internal accepted (time, state) points.
    """
    model.check_state(s)
    if not t1 > t0:
        raise ContractError("t1 must exceed t0")
    cfg = cfg or IntegratorConfig()
    f = ode.batched_rhs(model)
    mode = np.array([s.mode], dtype=np.int64)
    X = s.x[None, :].astype(np.float64)
    t = float(t0)
    h, K1 = ode.initial_step(f, mode, X, t1 - t0, cfg)
    internal: list[tuple[float, State]] = []
    steps = 0
    while t < t1 - 1e-15 * max(abs(t1), 1.0):
        steps += 1
        if steps > cfg.max_internal_steps:
            raise DivergenceError(
                f"{model.name}: exceeded max internal steps near t={t:.6g}"
            )
        h_try = np.minimum(h, t1 - t)
        Y_new, K = ode.rk_step(f, mode, X, h_try, K1)
        err = ode.error_norm(X, Y_new, K, h_try, cfg.rel_tol, cfg.abs_tol)
        h = np.minimum(h_try * ode.step_factor(err), cfg.max_step)
        if err[0] <= 1.0:
            if not np.all(np.isfinite(Y_new)) or \
                    np.max(np.abs(Y_new)) > cfg.blowup_norm:
                raise _failure_error(model, STATUS_BLOWUP, t,
                                     State(s.mode, X[0]))
            t = t + float(h_try[0])
            X = Y_new
            K1 = K[6]
            internal.append((t, State(s.mode, X[0])))
        elif h[0] < 1e-15 * max(abs(t), 1.0):
            raise _failure_error(model, STATUS_BLOWUP, t, State(s.mode, X[0]))
    return State(s.mode, X[0]), internal


def locate_jump(
    model: HybridSystem,
    before: tuple[State, float],
    after: tuple[State, float],
    cfg: IntegratorConfig | None = None,
) -> tuple[float, State]:
    """Bisect a guard crossing bracketed by two (state, time) points.

    The midpoint state at each bisection step comes from integrating the
    mode's dynamics from the bracket's disabled end.  Returns (t*, state)
    with the state on the enabled side of the guard, so it satisfies the
    guard within one bisection width.
    """
    s_lo, t_lo = before
    s_hi, t_hi = after
    model.check_state(s_lo)
    model.check_state(s_hi)
    if not t_hi > t_lo:
        raise ContractError("bracket times must be increasing")
    if s_lo.mode != s_hi.mode:
        raise ContractError("bracket endpoints must share a mode")
    g_lo = model.guard_value_x(s_lo.mode, s_lo.x[None, :])
    g_hi = model.guard_value_x(s_hi.mode, s_hi.x[None, :])
    if g_lo is None:
        raise ContractError(f"mode {s_lo.mode} has no guard")
    if not (g_lo[0] < 0.0 <= g_hi[0]):
        raise ContractError(
            "guard must be disabled at bracket start and enabled at end"
        )
    cfg = cfg or IntegratorConfig()
    tol = cfg.guard_tol if cfg.guard_tol is not None else \
        1e-9 * max(abs(t_hi), 1.0)
    cur_s, cur_t = s_lo, t_lo
    hi_t, hi_s = t_hi, s_hi
    for _ in range(_BISECT_LIMIT):
        if hi_t - cur_t <= tol:
            break
        mid_t = 0.5 * (cur_t + hi_t)
        mid_s, _ = integrate_segment(model, cur_s, cur_t, mid_t, cfg)
        g_mid = model.guard_value_x(mid_s.mode, mid_s.x[None, :])[0]
        if g_mid >= 0.0:
            hi_t, hi_s = mid_t, mid_s
        else:
            cur_s, cur_t = mid_s, mid_t
    return hi_t, hi_s


def save_trace_csv(trace: SimTrace, path) -> None:
    """Write a trace as CSV: header t,mode,x1..xn,jump_flag.

    Grid rows carry jump_flag 0.  Each jump contributes two extra rows at
    the jump instant (pre- and post-reset state) with jump_flag 1, placed
    in time order among the grid rows.  Floats use round-trip precision.
    """
    dim = trace.grid.shape[1]
    header = "t,mode," + ",".join(f"x{i + 1}" for i in range(dim)) + ",jump_flag"
    rows: list[tuple[float, int, np.ndarray, int]] = []
    for j in range(len(trace)):
        rows.append((float(trace.times[j]), int(trace.modes[j]),
                     trace.grid[j], 0))
    for jump in trace.jumps:
        rows.append((jump.time, jump.pre.mode, jump.pre.x, 1))
        rows.append((jump.time, jump.post.mode, jump.post.x, 1))
    rows.sort(key=lambda r: (r[0], r[3]))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, m, x, flag in rows:
            vals = ",".join(repr(float(v)) for v in x)
            fh.write(f"{t!r},{m},{vals},{flag}\n")
