import numpy as np
import pytest

from hennion_lab import make_algebra


@pytest.fixture
def qubit():
    return make_algebra([2], [1.0])


@pytest.fixture
def qutrit():
    return make_algebra([3], [1.0])


@pytest.fixture
def two_blocks():
    return make_algebra([2, 2], [1.0, 3.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
