import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from prefqc import QuadratureGrid

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def grid() -> QuadratureGrid:
    return QuadratureGrid.uniform()


@pytest.fixture
def rng() -> np.random.Generator:
    # Function-scoped: a shared generator would make tests order-dependent.
    return np.random.default_rng(20260816)
