import numpy as np
import pytest

from ppbo.acquisition import AcquisitionConfig
from ppbo.geometry import ProjectiveQuery, coordinate_projection, query_with_reference
from ppbo.gp import Hyperparameters, TgnSchedule, fit_map, make_observation


def random_query(rng, dim):
    """A valid random query: random coordinate projection, random reference."""
    xi = coordinate_projection(dim, int(rng.integers(dim)))
    return query_with_reference(xi, rng.uniform(size=dim))


def random_dataset(rng, n_obs, m, dim, schedule=None):
    """Random observations with uniform-phase pseudo-observations."""
    schedule = schedule or TgnSchedule(n_uniform=10**9)
    out = []
    for i in range(n_obs):
        q = random_query(rng, dim)
        alpha = float(rng.uniform())
        out.append(make_observation(q, alpha, m, schedule, i, rng))
    return out


def fitted_model(seed=0, n_obs=2, m=6, dim=2, hyper=None):
    rng = np.random.default_rng(seed)
    hyper = hyper or Hyperparameters.default(dim)
    ds = random_dataset(rng, n_obs, m, dim)
    return fit_map(ds, hyper, dim=dim)


@pytest.fixture(scope="session")
def small_model():
    """Shared 2-d model with two observations; cheap to predict against."""
    return fitted_model(seed=3)


@pytest.fixture(scope="session")
def medium_model():
    """Richer 2-d model for acquisition scoring tests."""
    return fitted_model(seed=7, n_obs=4, m=10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def acq_cfg():
    return AcquisitionConfig(strategy="ei", K=64, J=25, restarts=5, R=8)
