import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nssmol import functionals as fn
from nssmol.model import PhysParams
from nssmol.problems import potential_from_function

from conftest import linear_pot, state_of, unit_grid, zero_pot


@pytest.mark.parametrize("rho,kw,expect", [(2.0, dict(), 4.0), (0.0, dict(gamma=3.7, delta=0.2), 0.0),
                                            (1.0, dict(delta=0.1), 1.1)])
def test_pressure_examples(rho, kw, expect):
    assert fn.pressure(rho, PhysParams(**kw)) == pytest.approx(expect, rel=1e-15)


def test_pressure_rejects_negative():
    with pytest.raises(ValueError):
        fn.pressure(np.array([-1.0]), PhysParams())


@given(st.floats(0.0, 50.0), st.floats(1.1, 4.0), st.floats(0.0, 0.1))
def test_pressure_potential_relation(r, gamma, delta):
    """rho Pi'(rho) - Pi(rho) = p(rho)."""
    p = PhysParams(gamma=gamma, delta=delta)
    lhs = r * fn.enthalpy(r, p) - fn.pressure_potential(r, p)
    assert lhs == pytest.approx(fn.pressure(r, p), rel=1e-10, abs=1e-300)


def test_entropy_density_floor():
    e = fn.entropy_density(np.array([0.0, 1e-40, 1.0, math.e]))
    np.testing.assert_allclose(e, [0.0, 0.0, 0.0, math.e])


def test_energy_uniform_and_vacuum(params):
    g = unit_grid(16)
    pot = zero_pot(g)
    assert fn.total_energy(state_of(g, 1.0, 0.0, 1.0), pot, params).total == pytest.approx(1.0, rel=1e-14)
    assert fn.total_energy(state_of(g, 0.0, 0.0, 0.0), pot, params).total == 0.0


def _energy_example(n, params):
    g = unit_grid(n)
    x = g.centers()[0]
    s = state_of(g, 1.0, 0.0, np.exp(-x) / (1 - math.exp(-1)))
    return fn.total_energy(s, linear_pot(g), params).total


def test_energy_regression_vs_fine_quadrature(params):
    ref = _energy_example(1000, params)
    # midpoint rule: second-order convergence to the fine value
    errs = [abs(_energy_example(n, params) - ref) for n in (25, 50, 100)]
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
    assert errs[2] < 1e-5


def test_energy_kinetic_part(params):
    g = unit_grid(8)
    s = state_of(g, 2.0, 3.0, 0.0)
    assert fn.total_energy(s, zero_pot(g), params).kinetic == pytest.approx(0.5 * 2 * 9)


def test_dissipation_eta_closed_form(params):
    g = unit_grid(1000)
    x = g.centers()[0]
    s = state_of(g, 1.0, 0.0, np.exp(-x))
    dv, de = fn.dissipation(s, zero_pot(g), params)
    assert dv == 0.0
    assert de == pytest.approx(1 - math.exp(-1), rel=2e-3)


def test_dissipation_equilibrium_small(params):
    g = unit_grid(200)
    pot = linear_pot(g)
    s = state_of(g, 1.0, 0.0, np.exp(-pot.phi))
    dv, de = fn.dissipation(s, pot, params)
    assert dv == 0.0 and de < 1e-24  # roundoff only


def test_dissipation_viscous_smooth_profile(params):
    """u = sin(pi x) vanishes at the walls; int |u'|^2 = pi^2 / 2."""
    errs = []
    for n in (50, 100):
        g = unit_grid(n)
        s = state_of(g, 1.0, np.sin(np.pi * g.centers()[0]), 0.0)
        dv, _ = fn.dissipation(s, zero_pot(g), params)
        errs.append(abs(dv - np.pi**2 / 2))
    assert errs[1] < 0.02 and errs[0] / errs[1] > 1.8


def test_dissipation_linear_gradient_interior(params):
    """A linear profile has the exact gradient s on every interior face."""
    from nssmol.operators import viscous_dissipation

    n, slope = 20, 3.0
    g = unit_grid(n)
    x = g.centers()[0]
    u = slope * (x - 0.5)
    d_all = viscous_dissipation(g, u[None], 1.0, 0.0)
    # boundary faces use the no-slip ghost (ghost = -interior) at half weight
    dx = 1.0 / n
    d_wall = 2 * 0.5 * dx * (2 * u[0] / dx) ** 2
    assert d_all - d_wall == pytest.approx(slope**2 * (1 - dx), rel=1e-12)


@given(arrays(float, 12, elements=st.floats(0.01, 20.0)), st.floats(0.0, 4.0))
def test_particle_dissipation_below_flux_entropy_dissipation(eta, slope):
    """The reported particle dissipation never exceeds sum F d(log eta + phi)."""
    from nssmol.spatial import particle_flux

    g = unit_grid(12)
    pot = linear_pot(g, slope)
    s = state_of(g, 1.0, 0.0, eta)
    f = particle_flux(eta, np.zeros((1, 12)), pot)[0][1:-1]
    true = float(np.sum(-f * np.diff(np.log(eta) + pot.phi)) * 1.0)
    _, de = fn.dissipation(s, pot, PhysParams())
    assert de <= true * (1 + 1e-9) + 1e-12


@pytest.mark.parametrize("n", [10, 37])
def test_masses_examples(n):
    g = unit_grid(n)
    x = g.centers()[0]
    s = state_of(g, 1.0, 0.0, 0.0)
    assert fn.masses(s, g) == (pytest.approx(1.0, rel=1e-14), 0.0)
    s = state_of(g, (1.5 - x) / 2, 0.0, 0.0)
    assert fn.masses(s, g)[0] == pytest.approx(0.5, rel=1e-14)
