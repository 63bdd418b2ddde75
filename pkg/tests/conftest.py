import numpy as np
import pytest

from gmfg import kernels
from gmfg.game import build_beach_bar
from gmfg.graphon import SBM, Exp, discretize

SBM_TWO_BLOCK = SBM((0.7, 1.0), ((0.9, 0.3), (0.3, 0.9)))


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Run the test once per available kernel backend."""
    previous = kernels.backend_name()
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


@pytest.fixture(scope="session")
def beach_bar():
    return build_beach_bar()


@pytest.fixture(scope="session")
def sbm10():
    return discretize(SBM_TWO_BLOCK, 10, 10)


@pytest.fixture(scope="session")
def exp10():
    return discretize(Exp(3.0), 10, 10)


def random_policy(rng, n, horizon, n_states, n_actions, floor=0.0):
    pi = rng.dirichlet(np.ones(n_actions), size=(n, horizon, n_states))
    return (1 - floor) * pi + floor / n_actions
