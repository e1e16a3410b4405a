import numpy as np
import pytest

from mcsd import StiefelManifold, make_brockett, random_point


@pytest.fixture(scope="session")
def small_instance():
    """(50, 3, 200) desk-scale instance shared by the slower checks."""
    return make_brockett(50, 3, 200, data_seed=7)


@pytest.fixture(scope="session")
def pca_instance():
    """(200, 5, 1000) benchmark-scale instance."""
    return make_brockett(200, 5, 1000, data_seed=7)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def haar(n, p, seed=0):
    return random_point(StiefelManifold(n, p), np.random.default_rng(seed))
