from __future__ import annotations

import pytest

from isosoliton.bryant_builder import integrate_unstable, reconstruct_metric
from isosoliton.warp_core import make_cigar, make_euclidean, make_sphere_warp

_TRAJ: dict = {}


def bryant_trajectory(n: int):
    if n not in _TRAJ:
        _TRAJ[n] = integrate_unstable(n)
    return _TRAJ[n]


@pytest.fixture(scope="session")
def cigar():
    return make_cigar()


@pytest.fixture(scope="session")
def euclid2():
    return make_euclidean(2)


@pytest.fixture(scope="session")
def euclid3():
    return make_euclidean(3)


@pytest.fixture(scope="session")
def sphere_warp():
    return make_sphere_warp()


@pytest.fixture(scope="session", params=[3, 4, 5, 6])
def traj(request):
    return bryant_trajectory(request.param)


@pytest.fixture(scope="session")
def traj3():
    return bryant_trajectory(3)


@pytest.fixture(scope="session")
def bryant3(traj3):
    return reconstruct_metric(traj3)


@pytest.fixture(scope="session")
def bryant4():
    return reconstruct_metric(bryant_trajectory(4))
