import numpy as np
import pytest
from hypothesis import settings

from nssmol.model import Grid, PhysParams, SimState
from nssmol.problems import potential_from_function

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


def unit_grid(n=64, dim=1):
    if dim == 1:
        return Grid(1, 0.0, 1.0, n)
    return Grid(2, (0.0, 0.0), (1.0, 1.0), (n, n))


def linear_pot(grid, g=1.0):
    return potential_from_function(grid, lambda *x: g * x[-1])


def zero_pot(grid):
    return potential_from_function(grid, lambda *x: np.zeros_like(x[0]))


def state_of(grid, rho, u, eta, time=0.0):
    rho = np.broadcast_to(np.asarray(rho, float), grid.shape).copy()
    eta = np.broadcast_to(np.asarray(eta, float), grid.shape).copy()
    u = np.broadcast_to(np.asarray(u, float), (grid.dim,) + grid.shape).copy()
    return SimState.from_velocity(rho, u, eta, time)


@pytest.fixture
def params():
    return PhysParams(a=1.0, gamma=2.0, mu=1.0, lam=0.0, beta=1.0, delta=0.0)
