import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nssmol.model import Grid, PhysParams, ValidationError
from nssmol.problems import potential_from_function
from nssmol.stationary import (
    solve_eta_s,
    solve_rho_s,
    solve_stationary,
    stationary_residual,
    validate_confinement,
)

from conftest import linear_pot, unit_grid, zero_pot


def test_eta_flat():
    g = unit_grid(10)
    eta, c = solve_eta_s(zero_pot(g), 1.0)
    assert c == pytest.approx(1.0, rel=1e-15)
    np.testing.assert_allclose(eta, 1.0, rtol=1e-15)


def test_eta_linear_closed_form():
    g = unit_grid(1000)
    x = g.centers()[0]
    _, c = solve_eta_s(linear_pot(g), 1.0)
    quad = 1.0 / (np.sum(np.exp(-x)) / 1000)
    assert c == pytest.approx(quad, abs=1e-12)
    assert c == pytest.approx(1 / (1 - math.exp(-1)), abs=1e-7)  # midpoint error ~ dx^2 / 24


def test_eta_rejects_bad_mass():
    with pytest.raises(ValidationError):
        solve_eta_s(zero_pot(unit_grid(4)), 0.0)


@pytest.mark.parametrize("n", [100, 1000])
def test_rho_linear_closed_forms(params, n):
    g = unit_grid(n)
    pot = linear_pot(g)
    x = g.centers()[0]
    rho, c = solve_rho_s(pot, params, 0.5)
    assert c == pytest.approx(1.5, abs=1e-8)
    np.testing.assert_allclose(rho, (1.5 - x) / 2, atol=1e-8)
    rho, c = solve_rho_s(pot, params, 1 / 16)
    assert c == pytest.approx(0.5, abs=1e-8)
    np.testing.assert_allclose(rho, np.maximum(0.5 - x, 0) / 2, atol=1e-8)
    assert np.all(rho[x > 0.5] == 0.0)


@given(st.floats(1.1, 4.0), st.floats(0.01, 10.0))
def test_rho_flat_potential_is_constant(gamma, mass):
    g = unit_grid(8)
    rho, _ = solve_rho_s(zero_pot(g), PhysParams(gamma=gamma), mass)
    np.testing.assert_allclose(rho, mass, rtol=1e-9)


@given(st.floats(0.05, 5.0), st.floats(0.1, 3.0), st.sampled_from([0.0, 1e-3, 1e-2]))
def test_rho_mass_constraint_property(mass, beta, delta):
    g = unit_grid(32)
    pot = potential_from_function(g, lambda x: 2.0 * (x - 0.3) ** 2)
    rho, _ = solve_rho_s(pot, PhysParams(beta=beta, delta=delta), mass)
    assert np.all(rho >= 0)
    assert g.integrate(rho) == pytest.approx(mass, rel=1e-9)


def test_rho_negative_beta_piles_up_high(params):
    g = unit_grid(50)
    rho, _ = solve_rho_s(linear_pot(g), PhysParams(beta=-1.0), 0.5)
    assert rho[-1] > rho[0]


def test_residual_refinement_and_exactness(params):
    res = []
    for n in (40, 80):
        g = unit_grid(n)
        pot = potential_from_function(g, lambda x: np.sin(2 * x) + x)
        # for gamma = 2 the central face form is exact on sampled profiles
        assert solve_stationary(pot, params, 1.0, 1.0).residuals["rho"] < 1e-12
        st_ = solve_stationary(pot, PhysParams(gamma=3.0), 1.0, 1.0)
        res.append(st_.residuals)
        assert st_.residuals["eta_sg"] < 1e-12
    assert res[0]["rho"] / res[1]["rho"] >= 3.0
    assert res[0]["eta"] / res[1]["eta"] >= 3.0


def test_residual_flat_is_zero(params):
    g = unit_grid(10)
    r = stationary_residual(np.full(10, 2.0), np.full(10, 0.5), zero_pot(g), params)
    assert r == {"rho": 0.0, "eta": 0.0, "eta_sg": 0.0}


def test_report_text_has_values(params):
    g = unit_grid(100)
    txt = solve_stationary(linear_pot(g), params, 0.5, 1.0).report_text()
    assert "[values]" in txt and "c_rho = 1.5" in txt


def test_confinement_linear_passes(params):
    rep = validate_confinement(linear_pot(unit_grid(64)), params)
    assert rep.passed and rep.checks["connected_sublevels"]
    assert rep.growth["c1"] == pytest.approx(0.0, abs=1e-9)


def test_confinement_double_well_fails_connectivity(params):
    g = Grid(1, -2.0, 2.0, 200)
    rep = validate_confinement(potential_from_function(g, lambda x: (x**2 - 1) ** 2), params)
    assert not rep.passed and not rep.checks["connected_sublevels"]
    assert 0.0 < rep.failing_level < 1.0 and rep.n_components == 2


def test_confinement_flat_unbounded_fails(params):
    g = Grid(1, 0.0, 10.0, 100, "truncated-unbounded")
    rep = validate_confinement(zero_pot(g), params)
    assert not rep.passed
    assert not rep.checks["integrable_tail"] and not rep.checks["growth"]


def test_confinement_unbounded_needs_positive_beta():
    g = Grid(1, 0.0, 20.0, 200, "truncated-unbounded")
    pot = linear_pot(g)
    assert validate_confinement(pot, PhysParams(beta=0.5)).passed
    rep = validate_confinement(pot, PhysParams(beta=-0.5))
    assert not rep.passed and not rep.checks["buoyancy_sign"]


def test_confinement_2d_quadratic_passes(params):
    g = Grid(2, (-3.0, -3.0), (3.0, 3.0), (30, 30), "truncated-unbounded")
    pot = potential_from_function(g, lambda x, y: 0.5 * 2.0 * (x**2 + y**2))
    assert validate_confinement(pot, params).passed
