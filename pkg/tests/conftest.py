import numpy as np
import pytest

from plugmc import (
    Functional,
    TimeGrid,
    Path,
    bs_small_noise_model,
    build_derivative_system,
    levy_model,
    ou_jump_model,
)

# The replicated-study settings used throughout: theta0 = (0.2, 1.0),
# x0 = 1, eps = 1/sqrt(500), call strike 0.75, rate 0.05, horizon 1.
THETA0 = np.array([0.2, 1.0])
N_OBS = 500
EPS = 1.0 / np.sqrt(N_OBS)
STRIKE = 0.75
RATE = 0.05
HORIZON = 1.0


@pytest.fixture(scope="session")
def bs_model():
    return bs_small_noise_model(THETA0[0], THETA0[1], EPS, 1.0)


@pytest.fixture(scope="session")
def bs_system(bs_model):
    return build_derivative_system(bs_model)


@pytest.fixture(scope="session")
def ou_model():
    return ou_jump_model(1.0, 0.3, 0.5, 1.0, 1.0)


@pytest.fixture(scope="session")
def ou_system(ou_model):
    return build_derivative_system(ou_model)


@pytest.fixture(scope="session")
def levy():
    return levy_model(0.1, 0.3, 0.5, 1.0)


@pytest.fixture(scope="session")
def call_functional():
    return Functional(
        kind="smoothed_call_terminal",
        horizon=HORIZON,
        strike=STRIKE,
        rate=RATE,
        eps_smooth=1e-3 * STRIKE,
    )


def make_path(values, horizon=1.0):
    values = np.asarray(values, dtype=float)
    return Path(grid=TimeGrid(horizon, values.size - 1), values=values)
