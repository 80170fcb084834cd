import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ktrunc",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ktrunc")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
