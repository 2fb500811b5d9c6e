import numpy as np
import pytest

from bohmion.integrators import PhysicalConstants


@pytest.fixture
def consts():
    return PhysicalConstants()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
