import numpy as np
import pytest

from resoscan.grid import make_grid
from resoscan.potential import SystemParams, default_surrogate


@pytest.fixture(scope="session")
def params():
    return SystemParams()


@pytest.fixture(scope="session")
def surrogate():
    return default_surrogate()


@pytest.fixture
def small_grid():
    return make_grid(30.0, 96)


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)
