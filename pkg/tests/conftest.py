import hypothesis
import numpy as np
import pytest

from rtrecovery.mesh import unit_square_mesh

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def square_mesh_86():
    return unit_square_mesh(86, seed=0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
