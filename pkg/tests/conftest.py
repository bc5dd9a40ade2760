import numpy as np
import pytest

from gpvortex.profile import solve_profile


@pytest.fixture(scope="session")
def prof():
    return solve_profile()


@pytest.fixture(scope="session")
def prof_long():
    return solve_profile(r_max=200.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
