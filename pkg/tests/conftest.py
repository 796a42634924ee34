import numpy as np
import pytest

from ntalab import zoo
from ntalab.geometry import BoundaryMesh


@pytest.fixture(scope="session")
def unit_square():
    return zoo.square(8)


@pytest.fixture(scope="session")
def fine_square():
    return zoo.square(128)


@pytest.fixture(scope="session")
def circle():
    return zoo.disk(4096)


@pytest.fixture(scope="session")
def coarse_disk():
    return zoo.disk(1024)


@pytest.fixture(scope="session")
def unit_cube():
    return zoo.cube(4)


@pytest.fixture(scope="session")
def half_plane_box():
    """[-10, 10] x [0, 10]: near the origin this is the half-plane y > 0."""
    k = 80
    t = np.linspace(-10, 10, k + 1)[:-1]
    u = np.linspace(0, 10, k + 1)[:-1]
    V = np.concatenate([
        np.column_stack([t, np.zeros(k)]),
        np.column_stack([np.full(k, 10.0), u]),
        np.column_stack([-t, np.full(k, 10.0)]),
        np.column_stack([np.full(k, -10.0), 10 - u]),
    ])
    E = np.column_stack([np.arange(len(V)), (np.arange(len(V)) + 1) % len(V)])
    return BoundaryMesh(V, E)
