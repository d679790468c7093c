import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tiqnet import catalog
from tiqnet.qef import QuadratureGrid

settings.register_profile(
    "repo",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def bench():
    return catalog.benchmark()


@pytest.fixture(scope="session")
def chain():
    return catalog.coupled_chain()


@pytest.fixture(scope="session")
def skewed():
    return catalog.skewed()


@pytest.fixture(scope="session")
def classical_net():
    return catalog.classical_only()


@pytest.fixture(scope="session")
def grid1():
    return QuadratureGrid(1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
