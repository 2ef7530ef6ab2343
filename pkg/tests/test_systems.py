import numpy as np
import pytest

from reachlearn.errors import ConfigError, ContractError, SingularityError
from reachlearn.systems import available_models, get_model
from reachlearn.systems.base import ModelSpec, State

from conftest import uniform_states


def test_registry_lists_all_models():
    names = available_models()
    assert set(names) == {"pendulum", "neuron", "quadcopter"}


def test_registry_rejects_unknown_names():
    with pytest.raises(ConfigError):
        get_model("cartpole")
    with pytest.raises(ConfigError):
        get_model("neuron", params={"no_such_param": 1.0})


def test_get_model_applies_overrides():
    m = get_model("neuron", time_bound=7.5, step=0.02, params={"current": 10.0})
    assert m.spec.default_time_bound == 7.5
    assert m.spec.default_step == 0.02
    assert m.current == 10.0


def test_model_defaults(pendulum, neuron, quadcopter):
    assert (pendulum.spec.default_time_bound, pendulum.spec.default_step) == (5.0, 0.01)
    assert (neuron.spec.default_time_bound, neuron.spec.default_step) == (20.0, 0.01)
    assert (quadcopter.spec.default_time_bound, quadcopter.spec.default_step) == (15.0, 0.05)
    assert pendulum.dim == 2 and neuron.dim == 2 and quadcopter.dim == 7
    np.testing.assert_allclose(
        pendulum.spec.domain, [[-np.pi / 4, np.pi / 4], [-1.5, 1.5]]
    )
    np.testing.assert_allclose(neuron.spec.domain, [[-68.5, 30.0], [0.0, 25.0]])
    np.testing.assert_allclose(
        quadcopter.spec.domain,
        [[-0.05, 0.05], [0.0, 0.1], [-0.1, 0.1], [-0.2, 0.2],
         [-1.0, 0.4], [-150.0, 150.0], [50.0, 100.0]],
    )


def test_quadcopter_parameters(quadcopter):
    p = quadcopter.spec.params
    assert p["L"] == 0.23
    assert p["k"] == 5.2
    assert p["kd"] == 7.5e-7
    assert p["m"] == 0.65
    assert p["b"] == 3.13e-5
    assert p["g"] == 9.8
    assert p["Ixx"] == 0.0075
    assert p["Iyy"] == 0.0075
    assert p["Izz"] == 0.013


def test_modelspec_rejects_bad_shapes():
    with pytest.raises(ContractError):
        ModelSpec("m", 2, 1, ("a", "b"), np.array([[0.0, 1.0]]), 1.0, 0.1)
    with pytest.raises(ContractError):
        ModelSpec("m", 1, 1, ("a",), np.array([[1.0, 0.0]]), 1.0, 0.1)
    with pytest.raises(ContractError):
        ModelSpec("m", 1, 1, ("a",), np.array([[0.0, 1.0]]), 1.0, 2.0)


def test_state_is_immutable_and_hashable():
    s = State(0, [0.5, -1.0])
    with pytest.raises(ValueError):
        s.x[0] = 2.0
    assert s == State(0, [0.5, -1.0])
    assert s != State(1, [0.5, -1.0])
    assert hash(s) == hash(State(0, [0.5, -1.0]))
    with pytest.raises(ContractError):
        State(0, [[1.0, 2.0]])


def test_check_state_contracts(pendulum, quadcopter):
    with pytest.raises(ContractError):
        pendulum.check_state(State(0, [1.0, 2.0, 3.0]))
    with pytest.raises(ContractError):
        quadcopter.check_state(State(2, np.zeros(7)))


# -- pendulum controller ----------------------------------------------------


def test_control_zero_at_equilibrium(pendulum):
    assert pendulum.control_input(State(0, [0.0, 0.0])) == 0.0
    assert np.allclose(pendulum.derivative(State(0, [0.0, 0.0])), [0.0, 0.0])


def test_control_balance_branch_value(pendulum):
    # E = 0.5 in [-1, 1] and |omega|+|theta| = 1 <= 1.85
    assert pendulum.control_input(State(0, [0.0, 1.0])) == pytest.approx(2.0, abs=1e-15)
    d = pendulum.derivative(State(0, [0.0, 1.0]))
    assert d[0] == 1.0
    assert d[1] == pytest.approx(-2.0, abs=1e-15)


def test_control_mid_energy_outside_balance_is_zero(pendulum):
    # |omega|+|theta| = 2.077 > 1.85 while E = 0.65 + cos(0.777) - 1 stays
    # in [-1, 1]
    theta, omega = 0.777, 1.3
    e = 0.5 * omega + np.cos(theta) - 1.0
    assert -1.0 <= e <= 1.0
    assert pendulum.control_input(State(0, [theta, omega])) == 0.0


def test_control_high_energy_branch(pendulum):
    # E = 0.5*2.5 + cos(0) - 1 = 1.25 > 1; only reachable mid-trajectory,
    # outside the sampling box, where the controller must still be defined
    u = float(pendulum.control_input_x(np.array([[0.0, 2.5]]))[0])
    assert u == -0.7142857142857143
    expected = -(2.5 / (1.0 + 2.5)) * np.cos(0.0)
    assert u == pytest.approx(expected, abs=1e-15)


def test_control_low_energy_branch(pendulum):
    # theta = pi gives E = 0.5 - 2 < -1 (outside the sampling box, still defined)
    u = float(pendulum.control_input_x(np.array([[np.pi, 1.0]]))[0])
    expected = (1.0 / 2.0) * np.cos(np.pi)
    assert u == pytest.approx(expected, abs=1e-15)


def test_control_singularity_raises_on_single_state(pendulum):
    # theta = pi/2 keeps the balance branch active while cos(theta) ~ 0
    s = State(0, [np.pi / 2, 0.1])
    with pytest.raises(SingularityError) as exc:
        pendulum.control_input(s)
    assert "cos(theta)" in str(exc.value)
    with pytest.raises(SingularityError):
        pendulum.derivative(s)


def test_control_singularity_batched_flags_nonfinite(pendulum):
    X = np.array([[np.pi / 2, 0.1], [0.0, 1.0]])
    u = pendulum.control_input_x(X)
    assert not np.isfinite(u[0])
    assert u[1] == pytest.approx(2.0)


def test_control_branches_partition_the_plane(pendulum):
    rng = np.random.default_rng(31)
    X = np.column_stack(
        [rng.uniform(-np.pi, np.pi, 5000), rng.uniform(-4.0, 4.0, 5000)]
    )
    theta, omega = X[:, 0], X[:, 1]
    e = 0.5 * omega + np.cos(theta) - 1.0
    balance = (np.abs(e) <= 1.0) & (np.abs(omega) + np.abs(theta) <= 1.85)
    coast = (np.abs(e) <= 1.0) & ~balance
    low, high = e < -1.0, e > 1.0
    assert np.all(balance.astype(int) + coast + low + high == 1)
    u = pendulum.control_input_x(X)
    pump = omega / (1.0 + np.abs(omega)) * np.cos(theta)
    assert np.all(u[coast] == 0.0)
    np.testing.assert_array_equal(u[low], pump[low])
    np.testing.assert_array_equal(u[high], -pump[high])


def test_pendulum_has_no_jumps(pendulum):
    assert pendulum.guard_value_x(0, np.zeros((3, 2))) is None
    assert pendulum.guard(State(0, [0.1, 0.0])) is None


def test_pendulum_unsafe_matches_inequality(pendulum):
    assert pendulum.unsafe_contains(State(0, [0.8, 0.0]))
    assert not pendulum.unsafe_contains(State(0, [np.pi / 4, 0.0]))
    rng = np.random.default_rng(7)
    X = np.column_stack(
        [rng.uniform(-2.0, 2.0, 1_000_000), rng.uniform(-3.0, 3.0, 1_000_000)]
    )
    np.testing.assert_array_equal(
        pendulum.unsafe_x(0, X), np.abs(X[:, 0]) > np.pi / 4
    )


# -- neuron ------------------------------------------------------------------


def test_neuron_derivative_values(neuron):
    d = neuron.derivative(State(0, [-65.0, 8.0]))
    assert d[0] == pytest.approx(16.0, abs=1e-12)
    assert d[1] == pytest.approx(-0.42, abs=1e-12)


def test_neuron_guard_and_reset(neuron):
    assert neuron.guard(State(0, [29.9, 5.0])) is None
    assert neuron.guard(State(0, [30.0, 5.0])) == 0
    post = neuron.reset(State(0, [30.2, 5.0]))
    assert post == State(0, [-65.0, 13.0])
    with pytest.raises(ContractError):
        neuron.reset(State(0, [20.0, 5.0]))


def test_neuron_reset_disables_guard(neuron):
    post = neuron.reset(State(0, [31.0, 24.0]))
    assert neuron.guard(post) is None


def test_neuron_unsafe_boundary(neuron):
    assert neuron.unsafe_contains(State(0, [-68.5, 0.0]))
    assert not neuron.unsafe_contains(State(0, [-68.49, 0.0]))
    assert not neuron.unsafe_contains(State(0, [-60.0, 0.0]))
    rng = np.random.default_rng(8)
    X = np.column_stack(
        [rng.uniform(-80.0, 40.0, 1_000_000), rng.uniform(0.0, 25.0, 1_000_000)]
    )
    np.testing.assert_array_equal(neuron.unsafe_x(0, X), X[:, 0] <= -68.5)


# -- quadcopter ---------------------------------------------------------------


def test_quadcopter_guards_and_resets(quadcopter):
    x = np.zeros(7)
    x[6] = 499.0
    assert quadcopter.guard(State(0, x)) is None
    x[6] = 500.0
    assert quadcopter.guard(State(0, x)) == 1
    post = quadcopter.reset(State(0, x))
    assert post.mode == 1
    np.testing.assert_array_equal(post.x, x)
    x[6] = 200.0
    assert quadcopter.guard(State(1, x)) == 0
    assert quadcopter.reset(State(1, x)).mode == 0
    x[6] = 300.0
    assert quadcopter.guard(State(1, x)) is None


def test_quadcopter_unsafe_is_ground_contact(quadcopter):
    x = np.zeros(7)
    assert quadcopter.unsafe_contains(State(0, x))
    x[6] = 0.001
    assert not quadcopter.unsafe_contains(State(0, x))
    rng = np.random.default_rng(9)
    X = rng.uniform(-1.0, 1.0, size=(1_000_000, 7))
    np.testing.assert_array_equal(quadcopter.unsafe_x(0, X), X[:, 6] <= 0.0)
    np.testing.assert_array_equal(quadcopter.unsafe_x(1, X), X[:, 6] <= 0.0)


def test_quadcopter_euler_rate_kinematics(quadcopter):
    x = np.array([[0.03, 0.05, -0.07, 0.15, -0.6, 10.0, 80.0]])
    wx, wy, wz, phi, theta = x[0, :5]
    d = quadcopter.derivative_x(0, x)[0]
    assert d[3] == pytest.approx(
        wx + np.sin(phi) * np.tan(theta) * wy + np.cos(phi) * np.tan(theta) * wz,
        abs=1e-15,
    )
    assert d[4] == pytest.approx(np.cos(phi) * wy - np.sin(phi) * wz, abs=1e-15)
    assert d[6] == x[0, 5]


def test_quadcopter_angular_dynamics(quadcopter):
    x = np.array([[0.03, 0.05, -0.07, 0.15, -0.6, 10.0, 80.0]])
    wx, wy, wz = x[0, :3]
    p = quadcopter.spec.params
    ixx, iyy, izz = p["Ixx"], p["Iyy"], p["Izz"]
    d = quadcopter.derivative_x(0, x)[0]
    assert d[0] == pytest.approx(-(iyy - izz) * wy * wz / ixx, rel=1e-12)
    assert d[1] == pytest.approx(-(izz - ixx) * wx * wz / iyy, rel=1e-12)
    # yaw torque from the rotor drag imbalance enters d[2]
    assert np.isfinite(d[2])


def test_quadcopter_vertical_acceleration_dominated_by_gravity(quadcopter):
    x = np.array([[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 80.0]])
    d0 = quadcopter.derivative_x(0, x)[0]
    d1 = quadcopter.derivative_x(1, x)[0]
    assert d0[5] == pytest.approx(-9.8, abs=0.01)
    assert d1[5] == pytest.approx(9.8, abs=0.01)
    assert d1[5] == -d0[5]


def test_derivatives_are_deterministic(pendulum, neuron, quadcopter):
    for model in (pendulum, neuron, quadcopter):
        X = uniform_states(model, 256, seed=11)
        for mode in range(model.spec.mode_count):
            a = model.derivative_x(mode, X)
            b = model.derivative_x(mode, X.copy())
            np.testing.assert_array_equal(a, b)
