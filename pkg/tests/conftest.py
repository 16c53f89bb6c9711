import numpy as np
import pytest

from dyadwave import refinable


@pytest.fixture(scope="session")
def registry():
    return refinable.load_registry()


@pytest.fixture(scope="session")
def haar(registry):
    return registry["haar"]


@pytest.fixture(scope="session")
def db2(registry):
    return registry["db2"]


@pytest.fixture(scope="session")
def db3(registry):
    return registry["db3"]


@pytest.fixture(scope="session")
def db4(registry):
    return registry["db4"]


@pytest.fixture(scope="session")
def spline24(registry):
    return registry["spline24"]


@pytest.fixture()
def rng():
    return np.random.default_rng(20260808)
