import numpy as np
import pytest

from amsim.delta import DeltaGeometry
from amsim.spatial import InertialParams, quat_to_rot


@pytest.fixture
def geom():
    return DeltaGeometry()


@pytest.fixture
def vehicle_params():
    return InertialParams(1.379, np.array([0.0, 0.0, 0.03]),
                          np.diag([9.2e-3, 10.5e-3, 14.7e-3]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_rotation(rng):
    q = rng.standard_normal(4)
    return quat_to_rot(q / np.linalg.norm(q))


def lattice_inertia(bodies, n=48):
    """Point-mass discretization oracle, independent of the analytic path.

    Each body is a posed uniform box sampled on an n^3 lattice of cell
    centers; returns total mass, numeric CoM, and sum of
    m_k [(r.r)I - r outer r] about that CoM.
    """
    points = []
    masses = []
    for mass, dims, rot, com in bodies:
        ticks = (np.arange(n) + 0.5) / n - 0.5
        gx, gy, gz = np.meshgrid(ticks, ticks, ticks, indexing="ij")
        local = np.column_stack([gx.ravel() * dims[0],
                                 gy.ravel() * dims[1],
                                 gz.ravel() * dims[2]])
        points.append(local @ np.asarray(rot).T + np.asarray(com))
        masses.append(np.full(local.shape[0], mass / local.shape[0]))
    pts = np.vstack(points)
    m = np.concatenate(masses)
    total = m.sum()
    c = (m[:, None] * pts).sum(axis=0) / total
    r = pts - c
    rr = (r * r).sum(axis=1)
    j = np.zeros((3, 3))
    j[0, 0] = (m * (rr - r[:, 0] ** 2)).sum()
    j[1, 1] = (m * (rr - r[:, 1] ** 2)).sum()
    j[2, 2] = (m * (rr - r[:, 2] ** 2)).sum()
    j[0, 1] = j[1, 0] = -(m * r[:, 0] * r[:, 1]).sum()
    j[0, 2] = j[2, 0] = -(m * r[:, 0] * r[:, 2]).sum()
    j[1, 2] = j[2, 1] = -(m * r[:, 1] * r[:, 2]).sum()
    return total, c, j
