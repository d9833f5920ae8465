import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nssmol import _kernels
from nssmol._kernels import NUMBA_KERNELS, NUMPY_KERNELS

pos = st.floats(1e-6, 1e3)
small = st.floats(-30.0, 30.0)


def test_bernoulli_values():
    z = np.array([0.0, 1e-12, -1e-12, 1.0, -1.0, 50.0, -50.0])
    b = _kernels.bernoulli(z)
    assert b[0] == 1.0
    assert b[1] == pytest.approx(1.0, abs=1e-11)
    assert b[3] == pytest.approx(1.0 / (math.e - 1.0), rel=1e-14)
    assert b[4] - b[3] == pytest.approx(1.0, rel=1e-14)  # B(-z) - B(z) = z
    assert b[6] == pytest.approx(50.0, rel=1e-12)
    assert b[5] == pytest.approx(50.0 * math.exp(-50.0), rel=1e-10)


@given(arrays(float, 8, elements=small))
def test_bernoulli_identity(z):
    b = _kernels.bernoulli(z)
    bm = _kernels.bernoulli(-z)
    assert np.all(b > 0)
    np.testing.assert_allclose(bm - b, z, atol=1e-10 * (1 + np.abs(z)).max())


def test_sg_weights_zero_diffusion_limit():
    wl, wr = _kernels.sg_weights(np.zeros(3), np.array([-2.0, 0.0, 3.0]))
    np.testing.assert_array_equal(wl, [2.0, 0.0, 0.0])
    np.testing.assert_array_equal(wr, [0.0, 0.0, 3.0])


@given(arrays(float, 6, elements=pos), arrays(float, 6, elements=small))
def test_sg_weights_difference_is_drift(s, a):
    wl, wr = _kernels.sg_weights(s, a)
    # s B(a/s) - s B(-a/s) = -a
    np.testing.assert_allclose(wl - wr, -a, atol=1e-9 * (1 + np.abs(a).max() + s.max()))
    assert np.all(wl >= 0) and np.all(wr >= 0)


@given(arrays(float, 6, elements=pos), arrays(float, 6, elements=st.floats(0.5, 2.0)),
       st.floats(1.1, 4.0), st.sampled_from([0.0, 1e-3, 0.1]))
def test_rho_face_mean_identity(x, r, gamma, delta):
    """rho_hat * (Pi'(y) - Pi'(x)) = p(y) - p(x), and rho_hat lies between x and y."""
    y = x * r
    a = 1.3
    rho_hat, theta, s = _kernels.rho_face_means(x, y, a, gamma, delta)
    p = lambda v: a * v**gamma + delta * v**6
    d = lambda v: a * gamma / (gamma - 1) * v ** (gamma - 1) + 1.2 * delta * v**5
    lhs = rho_hat * (d(y) - d(x))
    np.testing.assert_allclose(lhs, p(y) - p(x), rtol=1e-8, atol=1e-12 * p(np.maximum(x, y)).max())
    assert np.all(rho_hat >= np.minimum(x, y) * (1 - 1e-12))
    assert np.all(rho_hat <= np.maximum(x, y) * (1 + 1e-12))
    np.testing.assert_allclose(theta * x + (1 - theta) * y, rho_hat, rtol=1e-10)
    assert np.all(s >= 0)


def test_rho_face_mean_vacuum_and_equal():
    rho_hat, theta, s = _kernels.rho_face_means(np.array([0.0, 2.0, 0.0]), np.array([0.0, 2.0, 1.0]), 1.0, 2.0, 0.0)
    assert rho_hat[0] == 0.0
    assert rho_hat[1] == 2.0
    assert 0.0 <= rho_hat[2] <= 1.0


@given(arrays(float, 6, elements=pos), arrays(float, 6, elements=st.floats(0.01, 100.0)))
def test_log_mean(x, r):
    y = x * r
    lam, theta = _kernels.log_mean(x, y)
    ne = np.abs(y - x) > 1e-9 * x
    expect = np.where(ne, (y - x) / np.where(ne, np.log(y / x), 1.0), x)
    np.testing.assert_allclose(lam, expect, rtol=1e-9)
    assert np.all((lam >= np.minimum(x, y) * (1 - 1e-12)) & (lam <= np.maximum(x, y) * (1 + 1e-12)))


def test_log_mean_extreme_ratio():
    x = np.array([1.0, 1e-300])
    y = np.array([1e-20, 1.0])
    lam, theta = _kernels.log_mean(x, y)
    expect = (y - x) / np.log(y / x)
    np.testing.assert_allclose(lam, expect, rtol=1e-14)
    assert np.all((theta >= 0) & (theta <= 1))


def test_log_mean_zero_side():
    lam, _ = _kernels.log_mean(np.array([0.0, 3.0]), np.array([1.0, 3.0]))
    assert lam[0] == 0.0 and lam[1] == 3.0


def test_tridiag_solve_matches_dense():
    rng = np.random.default_rng(1)
    n = 9
    lo, up = -rng.uniform(0, 1, n), -rng.uniform(0, 1, n)
    d = 3.0 + rng.uniform(0, 1, n)
    b = rng.normal(size=n)
    A = np.diag(d) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)
    for k in (NUMPY_KERNELS, NUMBA_KERNELS):
        np.testing.assert_allclose(k["tridiag_solve"](lo, d, up, b), np.linalg.solve(A, b), rtol=1e-12)


@given(arrays(float, 10, elements=pos), arrays(float, 10, elements=st.floats(0.2, 5.0)),
       arrays(float, 10, elements=small))
def test_backends_agree(x, r, a):
    y = x * r
    s = np.abs(a) + 0.1
    for name, args in [("bernoulli", (a,)), ("sg_weights", (s, a)),
                       ("rho_face_means", (x, y, 1.0, 2.0, 1e-3)), ("log_mean", (x, y))]:
        o1 = NUMPY_KERNELS[name](*args)
        o2 = NUMBA_KERNELS[name](*args)
        o1 = o1 if isinstance(o1, tuple) else (o1,)
        o2 = o2 if isinstance(o2, tuple) else (o2,)
        for u, v in zip(o1, o2):
            # theta near x = y is a ratio of small differences, hence 1e-9
            np.testing.assert_allclose(u, v, rtol=1e-9, atol=1e-300)


def test_nd_shapes_preserved():
    x = np.full((3, 4), 2.0)
    lam, theta = _kernels.log_mean(x, 2 * x)
    assert lam.shape == (3, 4) and theta.shape == (3, 4)


def test_backend_flag(monkeypatch):
    import subprocess
    import sys

    env = {"NSSMOL_PURE_NUMPY": "1", "PATH": "/usr/bin:/bin"}
    out = subprocess.run([sys.executable, "-c", "import nssmol; print(nssmol.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
