import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tpsurf import shapes
from tpsurf.simplicial import quadrature


@pytest.fixture(scope="session")
def sphere3():
    return shapes.icosphere(3)


@pytest.fixture(scope="session")
def sphere4():
    return shapes.icosphere(4)


@pytest.fixture(scope="session")
def sphere3_cloud(sphere3):
    return quadrature(sphere3, "centroid")


@pytest.fixture(scope="session")
def sphere4_cloud(sphere4):
    return quadrature(sphere4, "centroid")


@pytest.fixture(scope="session")
def circle512_cloud():
    return quadrature(shapes.circle_polygon(512), "centroid")


@pytest.fixture(scope="session")
def disk():
    return shapes.flat_disk(12, 32)


@pytest.fixture(scope="session")
def disk_cloud(disk):
    return quadrature(disk, "centroid")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
