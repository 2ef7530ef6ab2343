import numpy as np
import pytest

from reachlearn.systems import get_model


@pytest.fixture(scope="session")
def pendulum():
    return get_model("pendulum")


@pytest.fixture(scope="session")
def neuron():
    return get_model("neuron")


@pytest.fixture(scope="session")
def quadcopter():
    return get_model("quadcopter")


def uniform_states(model, n, seed):
    """n uniform draws from a model's domain box."""
    rng = np.random.default_rng(seed)
    lo = model.spec.domain[:, 0]
    hi = model.spec.domain[:, 1]
    return lo + (hi - lo) * rng.random((n, model.dim))
