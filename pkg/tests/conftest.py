from __future__ import annotations

from fractions import Fraction

import pytest

from helpers import built
from inverse_limits.edge_inverse import wedge_inverse

H = Fraction(1, 2)


@pytest.fixture(scope="session")
def wedge_system():
    """One wedge step over the unit interval."""
    return built("laakso_like", 1)


@pytest.fixture(scope="session")
def wedge_step(wedge_system):
    return wedge_system.steps[0]


@pytest.fixture(scope="session")
def wedge_graph(wedge_system):
    return wedge_system.levels[1]


@pytest.fixture(scope="session")
def parallel_system():
    return built("parallel", 1)


@pytest.fixture(scope="session")
def identity_system():
    return built("identity", 3)


@pytest.fixture(scope="session")
def uniform_wedge():
    return wedge_inverse(2, (H, H), (H, H), 1)
