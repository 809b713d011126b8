import numpy as np
import pytest

from hesim import lattice
from hesim.harmonic import SolverConfig


@pytest.fixture(scope="session")
def box84():
    return lattice.build_box_domain(8, 4)


@pytest.fixture(scope="session")
def box106():
    return lattice.build_box_domain(10, 6)


@pytest.fixture(scope="session")
def hex3():
    return lattice.build_hexagon_domain(3)


@pytest.fixture(scope="session")
def cfg():
    return SolverConfig()


@pytest.fixture()
def gen():
    return np.random.default_rng(1234)
