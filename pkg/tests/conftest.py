import numpy as np
import pytest

import qbranch as qb


@pytest.fixture(scope="session")
def full_grid():
    """The default laboratory grid (16 octaves, 512 angles)."""
    return qb.default_grid()


@pytest.fixture(scope="session")
def small_grid():
    """Cheap grid for algebraic identities that hold on any grid."""
    return qb.default_grid(r_min=2.0 ** -6, n_theta=64)


@pytest.fixture(scope="session")
def curve_cache(full_grid):
    cache = {}

    def get(q, p, h_coeffs=()):
        key = (q, p, tuple(h_coeffs))
        if key not in cache:
            cache[key] = qb.make_multigraph(
                qb.CurveSpec(q, p, h_coeffs), full_grid)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def random_smooth_qfunction(grid, q, rng, radial_degree=2, angular_modes=3):
    """Random piecewise-smooth Q-valued map with identity monodromy:
    trigonometric polynomials in the angle with polynomial radial profiles,
    sheets well separated by distinct constant offsets."""
    r = grid.radii[None, :, None]
    th = grid.angles[None, None, :]
    values = np.zeros((q, grid.n_rings, grid.n_theta, 2))
    for k in range(q):
        for comp in range(2):
            field = np.zeros((1, grid.n_rings, grid.n_theta))
            for m in range(angular_modes + 1):
                coeffs = rng.normal(size=radial_degree + 1)
                radial = sum(c * r ** j for j, c in enumerate(coeffs))
                phase = rng.uniform(0, 2 * np.pi)
                field = field + radial * np.cos(m * th + phase)
            values[k, :, :, comp] = field[0]
        values[k, :, :, 0] += 10.0 * k  # keep sheets apart
    return qb.QFunction(grid=grid, values=values,
                        monodromy=np.arange(q),
                        metadata={"kind": "random-smooth"})
