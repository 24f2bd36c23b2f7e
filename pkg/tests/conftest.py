import numpy as np
import pytest

from evdispatch import gen_grid
from evdispatch.experiments import default_network


@pytest.fixture(scope="session")
def default_net():
    return default_network()


@pytest.fixture(scope="session")
def small_net():
    """3x3 grid, two stations; cheap enough for per-test world builds."""
    return gen_grid(3, 3, 400.0, n_stations=2, min_station_dist=400.0, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
