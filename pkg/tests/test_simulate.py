import numpy as np
import pytest

from reachlearn.errors import BlowUpError, ContractError, DivergenceError
from reachlearn.ode import IntegratorConfig
from reachlearn.simulate import (
    STATUS_BLOWUP,
    STATUS_DIVERGED,
    STATUS_OK,
    SimTrace,
    grid_count,
    integrate_segment,
    label_states,
    locate_jump,
    reach_label,
    save_trace_csv,
    simulate,
    trace_label,
)
from reachlearn.systems import get_model
from reachlearn.systems.base import HybridSystem, ModelSpec, State

from conftest import uniform_states


def _spec(name, dim, time_bound, step, box=None):
    if box is None:
        box = np.tile([-100.0, 100.0], (dim, 1))
    return ModelSpec(
        name=name,
        dim=dim,
        mode_count=1,
        var_names=tuple(f"x{i}" for i in range(dim)),
        domain=box,
        default_time_bound=time_bound,
        default_step=step,
    )


class Clock(HybridSystem):
    """dv = 1 with a reset to 0 at v = 1; jumps land exactly on grid times."""

    def __init__(self):
        self.spec = _spec("clock", 1, 2.0, 0.5, np.array([[0.0, 2.0]]))

    def derivative_x(self, mode, x):
        return np.ones_like(x)

    def guard_value_x(self, mode, x):
        return x[..., 0] - 1.0

    def guard_target(self, mode):
        return 0

    def reset_x(self, mode, x):
        out = x.copy()
        out[..., 0] = 0.0
        return 0, out

    def unsafe_x(self, mode, x):
        return np.zeros(x.shape[0], dtype=bool)


class Livelock(Clock):
    """Reset that leaves the guard enabled: must be cut off, not spin."""

    def reset_x(self, mode, x):
        return 0, x.copy()


class Riccati(HybridSystem):
    """dx = x^2 from x(0)=1 blows up at t=1."""

    def __init__(self):
        self.spec = _spec("riccati", 1, 3.0, 0.1, np.array([[0.5, 2.0]]))

    def derivative_x(self, mode, x):
        return x * x

    def unsafe_x(self, mode, x):
        return np.zeros(x.shape[0], dtype=bool)


class CubicRamp(HybridSystem):
    """State (t, y) with y = t^3; guard y >= 8 crosses at t = 2."""

    def __init__(self):
        self.spec = _spec("cubicramp", 2, 3.0, 0.1)

    def derivative_x(self, mode, x):
        out = np.empty_like(x)
        out[..., 0] = 1.0
        out[..., 1] = 3.0 * x[..., 0] ** 2
        return out

    def guard_value_x(self, mode, x):
        return x[..., 1] - 8.0

    def guard_target(self, mode):
        return 0

    def reset_x(self, mode, x):
        out = x.copy()
        out[..., 1] = 0.0
        return 0, out

    def unsafe_x(self, mode, x):
        return np.zeros(x.shape[0], dtype=bool)


class HiddenSpike(HybridSystem):
    """State (t, y) with y = sin(2*pi*t): positive only between grid times.

    With h = 1 every grid state has y = 0 exactly (up to roundoff), so the
    unsafe set {y > 0.1} is visible to internal solver steps only.
    """

    def __init__(self):
        self.spec = _spec("hiddenspike", 2, 3.0, 1.0)

    def derivative_x(self, mode, x):
        out = np.empty_like(x)
        out[..., 0] = 1.0
        out[..., 1] = 2.0 * np.pi * np.cos(2.0 * np.pi * x[..., 0])
        return out

    def unsafe_x(self, mode, x):
        return x[..., 1] > 0.1


def test_grid_count_examples():
    assert grid_count(1.0, 0.25) == 4
    assert grid_count(5.0, 0.01) == 500
    assert grid_count(20.0, 0.01) == 2000
    assert grid_count(15.0, 0.05) == 300
    assert grid_count(0.999, 1.0) == 0


def test_trace_length_and_grid_times(pendulum):
    tr = simulate(pendulum, State(0, [0.1, 0.0]), time_bound=1.0, step=0.25)
    assert len(tr) == 5
    np.testing.assert_allclose(tr.times, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert not tr.partial


def test_trace_rejects_nonincreasing_times():
    with pytest.raises(ContractError):
        SimTrace(
            model="m",
            time_bound=1.0,
            step=0.5,
            times=np.array([0.0, 0.5, 0.5]),
            modes=np.zeros(3, dtype=np.int64),
            grid=np.zeros((3, 1)),
        )


def test_pendulum_controlled_return(pendulum):
    tr = simulate(pendulum, State(0, [0.5, 1.0]))
    assert len(tr) == 501
    assert np.abs(tr.grid[:, 0]).max() < np.pi / 4
    assert abs(tr.grid[-1, 0]) < 0.1  # heading back upright
    assert not trace_label(pendulum, tr)


def test_reach_label_regressions(pendulum):
    assert reach_label(pendulum, State(0, [0.8, 0.0]))  # starts unsafe
    assert not reach_label(pendulum, State(0, [0.0, 0.0]))
    assert not reach_label(pendulum, State(0, [0.5, 1.0]))
    assert reach_label(pendulum, State(0, [0.7, 1.5]))


def test_neuron_trace_jump_contract(neuron):
    tr = simulate(neuron, State(0, [-62.0, 0.1]))
    assert len(tr) == 2001
    assert len(tr.jumps) >= 2
    for j in tr.jumps:
        assert 0.0 <= j.time <= 20.0
        assert j.pre.x[0] == pytest.approx(30.0, abs=1e-4)
        assert j.post.x[0] == -65.0
        assert j.post.x[1] == pytest.approx(j.pre.x[1] + 8.0, abs=0.0)
    jump_times = [j.time for j in tr.jumps]
    assert jump_times == sorted(jump_times)


def test_initial_state_on_guard_jumps_at_time_zero(neuron):
    tr = simulate(neuron, State(0, [30.0, 5.0]), time_bound=1.0, step=0.5)
    assert tr.jumps[0].time == 0.0
    assert tr.jumps[0].post.x[0] == -65.0
    # the t=0 grid state is the pre-jump state
    assert tr.grid[0, 0] == 30.0


def test_jump_on_grid_time_records_prejump_state():
    ck = Clock()
    tr = simulate(ck, State(0, [0.5]))
    np.testing.assert_allclose(tr.times, [0.0, 0.5, 1.0, 1.5, 2.0])
    guard_tol = 1e-9 * 2.0
    assert len(tr.jumps) == 2
    for idx, (j, t_true) in enumerate(zip(tr.jumps, (0.5, 1.5))):
        # each event inherits the previous event's location offset
        assert abs(j.time - t_true) <= (idx + 2) * guard_tol
        assert j.pre.x[0] >= 1.0  # enabled side
        assert j.pre.x[0] == pytest.approx(1.0, abs=2 * guard_tol)
        assert j.post.x[0] == 0.0
    # grid hits the jump instant: left-continuous (pre-jump) value
    assert tr.grid[1, 0] == pytest.approx(1.0, abs=2 * guard_tol)
    assert tr.grid[2, 0] == pytest.approx(0.5, abs=1e-6)


def test_strict_labels_catch_between_grid_excursions():
    hs = HiddenSpike()
    x0 = np.array([[0.0, 0.0]])
    strict, status = label_states(hs, x0, time_bound=3.0, step=1.0, strict=True)
    grid, status2 = label_states(hs, x0, time_bound=3.0, step=1.0, strict=False)
    assert status[0] == STATUS_OK and status2[0] == STATUS_OK
    assert bool(strict[0]) is True
    assert bool(grid[0]) is False


def test_strict_is_superset_of_grid(neuron):
    X = uniform_states(neuron, 300, seed=23)
    strict, _ = label_states(neuron, X, strict=True)
    grid, _ = label_states(neuron, X, strict=False)
    assert np.all(grid <= strict)


def test_labels_deterministic_and_batch_invariant(neuron):
    X = uniform_states(neuron, 100, seed=29)
    a, sa = label_states(neuron, X)
    b, sb = label_states(neuron, X)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(sa, sb)
    half1, _ = label_states(neuron, X[:50])
    half2, _ = label_states(neuron, X[50:])
    np.testing.assert_array_equal(a, np.concatenate([half1, half2]))
    for i in range(5):
        assert reach_label(neuron, State(0, X[i])) == bool(a[i])


def test_traces_are_bit_identical(neuron):
    t1 = simulate(neuron, State(0, [-40.0, 3.0]))
    t2 = simulate(neuron, State(0, [-40.0, 3.0]))
    np.testing.assert_array_equal(t1.grid, t2.grid)
    np.testing.assert_array_equal(t1.times, t2.times)
    assert [(j.time, j.pre, j.post) for j in t1.jumps] == [
        (j.time, j.pre, j.post) for j in t2.jumps
    ]


def test_trace_agrees_with_batched_labels(neuron):
    X = uniform_states(neuron, 40, seed=31)
    labels, status = label_states(neuron, X, strict=False)
    for i in range(40):
        tr = simulate(neuron, State(0, X[i]))
        assert trace_label(neuron, tr) == bool(labels[i])


@pytest.mark.parametrize("name,half_T", [
    ("pendulum", 2.5), ("neuron", 10.0), ("quadcopter", 7.5),
])
def test_reach_label_monotone_in_time_bound(name, half_T):
    model = get_model(name)
    X = uniform_states(model, 1000, seed=37)
    early, s1 = label_states(model, X, time_bound=half_T)
    late, s2 = label_states(model, X, time_bound=2 * half_T)
    ok = (s1 == STATUS_OK) & (s2 == STATUS_OK)
    assert ok.mean() > 0.99
    assert np.all(late[ok] >= early[ok])


def test_tolerance_halving_converges(pendulum, neuron):
    # Local tolerances do not bound global error directly; the check is
    # convergence: halving the tolerance moves grid states toward a tight
    # reference, and pre-jump segments agree to a small absolute bound.
    cfg1 = IntegratorConfig()
    cfg2 = IntegratorConfig(rel_tol=5e-7, abs_tol=5e-10)
    ref = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13)
    X = uniform_states(pendulum, 25, seed=17)
    err1 = err2 = 0.0
    for i in range(25):
        t1 = simulate(pendulum, State(0, X[i]), cfg=cfg1)
        t2 = simulate(pendulum, State(0, X[i]), cfg=cfg2)
        tr = simulate(pendulum, State(0, X[i]), cfg=ref)
        err1 = max(err1, np.abs(t1.grid - tr.grid).max())
        err2 = max(err2, np.abs(t2.grid - tr.grid).max())
    assert err1 < 1e-3
    assert err2 < err1

    X = uniform_states(neuron, 25, seed=19)
    for i in range(25):
        t1 = simulate(neuron, State(0, X[i]), cfg=cfg1)
        t2 = simulate(neuron, State(0, X[i]), cfg=cfg2)
        if t1.jumps:
            assert t2.jumps
            assert abs(t1.jumps[0].time - t2.jumps[0].time) < 1e-5
            k = int(min(t1.jumps[0].time, t2.jumps[0].time) / 0.01)
        else:
            k = min(len(t1), len(t2))
        if k:
            assert np.abs(t1.grid[:k] - t2.grid[:k]).max() < 2e-3


def test_integrate_segment_contracts():
    model = Riccati()
    with pytest.raises(ContractError):
        integrate_segment(model, State(0, [1.0]), 1.0, 1.0, IntegratorConfig())
    with pytest.raises(ContractError):
        integrate_segment(model, State(0, [np.inf]), 0.0, 1.0, IntegratorConfig())


def test_blowup_reported_with_last_valid_time():
    model = Riccati()
    with pytest.raises(BlowUpError) as exc:
        reach_label(model, State(0, [1.0]), time_bound=3.0, step=0.1)
    assert exc.value.last_valid_time is not None
    assert 0.9 < exc.value.last_valid_time <= 1.01

    labels, status = label_states(model, np.array([[1.0], [0.1]]), time_bound=3.0, step=0.1)
    assert status[0] == STATUS_BLOWUP
    assert status[1] == STATUS_OK  # 1/(10 - t) stays finite over [0, 3]

    tr = simulate(model, State(0, [1.0]), time_bound=3.0, step=0.1)
    assert tr.partial
    assert "finite" in tr.failure_cause
    assert tr.times[-1] <= 1.0 + 1e-6


def test_livelocked_jumps_cut_off():
    model = Livelock()
    labels, status = label_states(model, np.array([[0.5]]), time_bound=2.0, step=0.5)
    assert status[0] == STATUS_DIVERGED
    with pytest.raises(DivergenceError):
        reach_label(model, State(0, [0.5]), time_bound=2.0, step=0.5)


def test_divergence_on_step_budget():
    model = Riccati()
    cfg = IntegratorConfig(max_internal_steps=3)
    labels, status = label_states(
        model, np.array([[0.1]]), time_bound=3.0, step=0.1, cfg=cfg
    )
    assert status[0] == STATUS_DIVERGED


def test_locate_jump_linear_crossing():
    # v rises at rate 20 through the guard v = 30 between t=1.0 and t=1.1
    class Ramp(HybridSystem):
        def __init__(self):
            self.spec = _spec("ramp", 1, 3.0, 0.1)

        def derivative_x(self, mode, x):
            return np.full_like(x, 20.0)

        def guard_value_x(self, mode, x):
            return x[..., 0] - 30.0

        def guard_target(self, mode):
            return 0

        def reset_x(self, mode, x):
            out = x.copy()
            out[..., 0] = -65.0
            return 0, out

        def unsafe_x(self, mode, x):
            return np.zeros(x.shape[0], dtype=bool)

    model = Ramp()
    cfg = IntegratorConfig(guard_tol=1e-9)
    t_star, s_star = locate_jump(
        model, (State(0, [29.0]), 1.0), (State(0, [31.0]), 1.1), cfg
    )
    assert t_star == pytest.approx(1.05, abs=1e-9)
    assert s_star.x[0] >= 30.0
    assert s_star.x[0] == pytest.approx(30.0, abs=20 * 2e-9)


def test_locate_jump_cubic_crossing():
    model = CubicRamp()
    cfg = IntegratorConfig(guard_tol=1e-9)
    end, _ = integrate_segment(model, State(0, [1.9, 1.9**3]), 1.9, 2.1, cfg)
    assert end.x[1] > 8.0
    t_star, s_star = locate_jump(
        model, (State(0, [1.9, 1.9**3]), 1.9), (end, 2.1), cfg
    )
    assert t_star == pytest.approx(2.0, abs=1e-8)
    assert s_star.x[1] >= 8.0


def test_locate_jump_validates_bracket():
    model = CubicRamp()
    cfg = IntegratorConfig()
    with pytest.raises(ContractError):
        locate_jump(model, (State(0, [2.5, 2.5**3]), 2.5), (State(0, [2.6, 2.6**3]), 2.6), cfg)
    with pytest.raises(ContractError):
        locate_jump(model, (State(0, [1.0, 1.0]), 1.0), (State(0, [1.1, 1.1**3]), 1.1), cfg)


def test_save_trace_csv_round_trip_floats(tmp_path, neuron):
    tr = simulate(neuron, State(0, [-62.0, 0.1]), time_bound=2.0, step=0.5)
    path = tmp_path / "trace.csv"
    save_trace_csv(tr, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,mode,x1,x2,jump_flag"
    grid_rows = [l for l in lines[1:] if l.endswith(",0")]
    jump_rows = [l for l in lines[1:] if l.endswith(",1")]
    assert len(grid_rows) == len(tr)
    assert len(jump_rows) == 2 * len(tr.jumps)
    for row, t, x in zip(grid_rows, tr.times, tr.grid):
        fields = row.split(",")
        assert float(fields[0]) == t
        assert float(fields[2]) == x[0]
        assert float(fields[3]) == x[1]


def test_quadcopter_mode_switch_trajectory(quadcopter):
    # climbing fast enough to cross z=500 flips to the descending mode
    x0 = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 120.0, 90.0])
    tr = simulate(quadcopter, State(0, x0))
    assert any(j.pre.x[6] >= 500.0 - 1e-3 for j in tr.jumps)
    first = tr.jumps[0]
    assert first.pre.mode == 0
    assert first.post.mode == 1
    np.testing.assert_array_equal(first.pre.x, first.post.x)
