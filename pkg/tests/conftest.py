import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hyperharmonic.extension import QuadratureSpec

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def quad4():
    """Smallest Gauss-Hermite rule; exact for the affine integrands of linear maps."""
    return QuadratureSpec(nodes_per_axis=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def halfspace_points(rng, count=20, extent=1.5, tmin=0.3, tmax=2.0):
    xy = rng.uniform(-extent, extent, (count, 2))
    t = rng.uniform(tmin, tmax, count)
    return np.column_stack([xy, t])


def ball_points(rng, count=20, rmax=0.8):
    v = rng.normal(size=(count, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (rmax * rng.random(count) ** (1 / 3))[:, None]
