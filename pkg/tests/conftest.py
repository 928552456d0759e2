import numpy as np
import pytest

from heisenberg_morrey.core.group import GroupElement, GroupParams
from heisenberg_morrey.core.potential import Potential


@pytest.fixture
def h1():
    return GroupParams(1)


@pytest.fixture
def h2():
    return GroupParams(2)


@pytest.fixture
def origin():
    return GroupElement.identity(1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def constant_potential():
    return Potential.constant(1.0)


@pytest.fixture
def power_potential():
    return Potential.homogeneous_power(1.0)


@pytest.fixture
def random_points(rng):
    def draw(count, n=1, box=3.0):
        return rng.uniform(-box, box, size=(count, 2 * n + 1))

    return draw
