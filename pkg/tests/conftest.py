import numpy as np
import pytest

from greenlab.coefficients import identity, skew_checkerboard
from greenlab.geometry import flat_disk, lipschitz_disk, lipschitz_square


@pytest.fixture(scope="session")
def square():
    return lipschitz_square()


@pytest.fixture(scope="session")
def disk():
    return lipschitz_disk()


@pytest.fixture(scope="session")
def fdisk():
    return flat_disk()


@pytest.fixture(scope="session")
def coarse_disk_mesh(disk):
    from greenlab.mesh import triangulate
    return triangulate(disk, 0.15)


@pytest.fixture(scope="session")
def skew():
    return skew_checkerboard(10.0)


@pytest.fixture(scope="session")
def ident():
    return identity()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
