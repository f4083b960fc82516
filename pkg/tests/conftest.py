import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hillgate import ForceField, LevelSetRegion, MetastablePair, PotentialSpec

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def double_well():
    return ForceField.conservative(PotentialSpec.double_well_1d(1.0, 1.0))


@pytest.fixture(scope="session")
def pair_1d():
    return MetastablePair(LevelSetRegion.ball([-1.0], 0.3, "A"),
                          LevelSetRegion.ball([1.0], 0.3, "B"))


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)
