import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nssmol import operators, spatial
from nssmol.model import Grid, PhysParams
from nssmol.problems import potential_from_function
from nssmol.spatial import Scheme
from nssmol.stationary import solve_eta_s, solve_rho_s

from conftest import linear_pot, state_of, unit_grid, zero_pot

UPWIND = Scheme("upwind")


def test_upwind_convective_flux_takes_donor(params):
    g = unit_grid(2)
    pot = zero_pot(g)
    f = spatial.convective_flux_rho(np.array([2.0, 5.0]), np.ones((1, 2)), pot, params, UPWIND)[0]
    np.testing.assert_array_equal(f, [0.0, 2.0, 0.0])
    f = spatial.convective_flux_rho(np.array([2.0, 5.0]), -np.ones((1, 2)), pot, params, UPWIND)[0]
    np.testing.assert_array_equal(f, [0.0, -5.0, 0.0])


@pytest.mark.parametrize("scheme", [UPWIND, spatial.DEFAULT_SCHEME])
def test_convective_flux_zero_velocity(params, scheme):
    g = unit_grid(6)
    f = spatial.convective_flux_rho(np.linspace(1, 2, 6), np.zeros((1, 6)), zero_pot(g), params, scheme)[0]
    assert np.all(f == 0.0)


def test_entropy_flux_uses_mean_between_neighbours(params):
    g = unit_grid(2)
    f = spatial.convective_flux_rho(np.array([2.0, 5.0]), np.ones((1, 2)), zero_pot(g), params)[0]
    # for gamma = 2 the mean dp / dPi' is the arithmetic mean
    assert f[1] == pytest.approx(3.5, rel=1e-14)


def test_viscous_operator_zero_and_quadratic():
    g = unit_grid(50)
    p = PhysParams(mu=0.7, lam=0.3)
    assert np.all(spatial.viscous_operator(np.zeros((1, 50)), g, p) == 0.0)
    x = g.centers()[0]
    v = spatial.viscous_operator((x * (1 - x))[None], g, p)[0]
    np.testing.assert_allclose(v[1:-1], -2.0, rtol=1e-10)


def _dense_viscous_2d(nx, ny, dx, dy, mu, lam):
    """Independent assembly: -grad of sum over faces of mu |grad u|^2 + lam |div u|^2,
    with ghost = -interior and half-weighted wall faces, by finite differences of the form."""
    n = 2 * nx * ny

    def form(v):
        u = v.reshape(2, nx, ny)
        tot = 0.0
        for c in range(2):
            pad = np.pad(u[c], 1)
            pad[0, 1:-1], pad[-1, 1:-1] = -u[c][0], -u[c][-1]
            pad[1:-1, 0], pad[1:-1, -1] = -u[c][:, 0], -u[c][:, -1]
            gx = np.diff(pad[:, 1:-1], axis=0) / dx
            gy = np.diff(pad[1:-1, :], axis=1) / dy
            wx = np.ones(nx + 1)
            wx[[0, -1]] = 0.5
            wy = np.ones(ny + 1)
            wy[[0, -1]] = 0.5
            tot += mu * (np.sum(wx[:, None] * gx**2) + np.sum(wy[None, :] * gy**2)) * dx * dy
        # vertex divergence from ghost-padded fields
        pads = []
        for c in range(2):
            pad = np.pad(u[c], 1)
            pad[0, 1:-1], pad[-1, 1:-1] = -u[c][0], -u[c][-1]
            pad[1:-1, 0], pad[1:-1, -1] = -u[c][:, 0], -u[c][:, -1]
            # corners reflect twice: ghost = +corner cell
            pad[0, 0], pad[0, -1], pad[-1, 0], pad[-1, -1] = u[c][0, 0], u[c][0, -1], u[c][-1, 0], u[c][-1, -1]
            pads.append(pad)
        ux, uy = pads
        dux = 0.5 * (np.diff(ux, axis=0)[:, :-1] + np.diff(ux, axis=0)[:, 1:]) / dx
        duy = 0.5 * (np.diff(uy, axis=1)[:-1, :] + np.diff(uy, axis=1)[1:, :]) / dy
        wv = np.outer(np.r_[0.5, np.ones(nx - 1), 0.5], np.r_[0.5, np.ones(ny - 1), 0.5])
        tot += lam * np.sum(wv * (dux + duy) ** 2) * dx * dy
        return tot

    # the form is quadratic: its Hessian is exact from second differences
    H = np.zeros((n, n))
    e = np.eye(n)
    f0 = form(np.zeros(n))
    fi = np.array([form(e[i]) for i in range(n)])
    for i in range(n):
        for j in range(i, n):
            H[i, j] = H[j, i] = 0.5 * (form(e[i] + e[j]) - fi[i] - fi[j] + f0) * 2
    return -H / (2 * dx * dy)


def test_viscous_matrix_2d_dense_oracle():
    g = Grid(2, (0.0, 0.0), (1.0, 2.0), (4, 4))
    mu, lam = 1.3, 0.4
    L = operators.viscous_matrix(g, mu, lam).toarray()
    ref = _dense_viscous_2d(4, 4, 0.25, 0.5, mu, lam)
    np.testing.assert_allclose(L, ref, atol=1e-10)


@given(arrays(float, (2, 5, 4), elements=st.floats(-3, 3)), st.floats(0.1, 3), st.floats(-0.05, 2))
def test_viscous_operator_symmetric_dissipative(u, mu, lam):
    g = Grid(2, (0.0, 0.0), (1.0, 1.0), (5, 4))
    L = operators.viscous_matrix(g, mu, lam)
    np.testing.assert_allclose((L - L.T).toarray(), 0.0, atol=1e-9)
    d = operators.viscous_dissipation(g, u, mu, lam)
    quad = -float(u.ravel() @ (L @ u.ravel())) * g.cell_volume
    assert d >= -1e-12
    assert quad == pytest.approx(d, rel=1e-10, abs=1e-10)


def test_viscous_1d_collapses_to_mu_plus_lambda():
    g = unit_grid(12)
    a = operators.viscous_matrix(g, 0.6, 0.4).toarray()
    b = operators.viscous_matrix(g, 1.0, 0.0).toarray()
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_particle_flux_exact_on_boltzmann():
    g = unit_grid(40)
    pot = potential_from_function(g, lambda x: 3.0 * x)
    eta = 2.0 * np.exp(-pot.phi)
    f = spatial.particle_flux(eta, np.zeros((1, 40)), pot)[0]
    assert np.max(np.abs(f)) < 1e-12


def test_particle_flux_pure_diffusion():
    g = unit_grid(5)
    eta = np.array([1.0, 3.0, 2.0, 2.0, 0.5])
    f = spatial.particle_flux(eta, np.zeros((1, 5)), zero_pot(g))[0]
    np.testing.assert_allclose(f[1:-1], (eta[:-1] - eta[1:]) / 0.2, rtol=1e-14)
    assert f[0] == 0.0 and f[-1] == 0.0


@pytest.mark.parametrize("dim", [1, 2])
def test_rhs_vanishes_at_equilibrium(params, dim):
    g = unit_grid(24, dim)
    pot = linear_pot(g)
    rho, _ = solve_rho_s(pot, params, 0.8)
    eta, _ = solve_eta_s(pot, 1.0)
    drho, dm, deta = spatial.assemble_semidiscrete_rhs(state_of(g, rho, 0.0, eta), pot, params)
    for r in (drho, dm, deta):
        assert np.max(np.abs(r)) <= 1e-8


def test_rhs_at_equilibrium_with_vacuum(params):
    """Mass and particles balance exactly; the momentum residual sits at the
    vacuum edge only and is first order in dx."""
    errs = []
    for n in (64, 128, 256):
        g = unit_grid(n)
        pot = linear_pot(g)
        rho, _ = solve_rho_s(pot, params, 1 / 16)
        eta, _ = solve_eta_s(pot, 1.0)
        drho, dm, deta = spatial.assemble_semidiscrete_rhs(state_of(g, rho, 0.0, eta), pot, params)
        assert np.max(np.abs(drho)) <= 1e-12 and np.max(np.abs(deta)) <= 1e-8
        edge = np.nonzero(rho == 0)[0][0]
        assert np.max(np.abs(np.delete(dm[0], [edge - 1, edge]))) <= 1e-12
        errs.append(np.max(np.abs(dm)))
    assert errs[0] / errs[1] > 1.8 and errs[1] / errs[2] > 1.8


def test_rhs_uniform_no_potential(params):
    g = unit_grid(10)
    for r in spatial.assemble_semidiscrete_rhs(state_of(g, 1.3, 0.0, 0.7), zero_pot(g), params):
        assert np.all(r == 0.0)


@given(arrays(float, 12, elements=st.floats(0.1, 5)), arrays(float, 12, elements=st.floats(-2, 2)),
       arrays(float, 12, elements=st.floats(0.0, 5)), st.sampled_from(["entropy", "upwind"]))
def test_rhs_conserves_mass(rho, u, eta, transport):
    g = unit_grid(12)
    pot = linear_pot(g, 2.0)
    p = PhysParams()
    drho, _, deta = spatial.assemble_semidiscrete_rhs(state_of(g, rho, u, eta), pot, p, Scheme(transport))
    assert abs(drho.sum()) <= 1e-10 * (1 + np.abs(drho).sum())
    assert abs(deta.sum()) <= 1e-10 * (1 + np.abs(deta).sum())
