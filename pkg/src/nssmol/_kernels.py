"""Hot elementwise kernels and the 1D tridiagonal solver.

Two implementations live side by side: numba-compiled loops and plain numpy.
The module-level names point at the numba versions unless numba is missing or
the environment variable ``NSSMOL_PURE_NUMPY`` is set to a truthy value.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.linalg import solve_banded

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = _HAVE_NUMBA and not _flag("NSSMOL_PURE_NUMPY")
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _np_bernoulli(z):
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0.0
    with np.errstate(over="ignore"):
        out[nz] = z[nz] / np.expm1(z[nz])
    return out


def _np_sg_weights(s, a):
    """Return (s*B(a/s), s*B(-a/s)) with the s -> 0 limit (max(-a,0), max(a,0))."""
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    wl = np.maximum(-a, 0.0)
    wr = np.maximum(a, 0.0)
    pos = s > 0.0
    if np.any(pos):
        z = a[pos] / s[pos]
        wl[pos] = s[pos] * _np_bernoulli(z)
        wr[pos] = s[pos] * _np_bernoulli(-z)
    return wl, wr


def _np_dpow(x, y, q):
    # y**q - x**q without cancellation, x, y >= 0
    out = np.empty_like(x)
    pos = x > 0.0
    xp = x[pos]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[pos] = xp**q * np.expm1(q * np.log1p((y[pos] - xp) / xp))
    out[~pos] = y[~pos] ** q
    return out


def _np_rho_face_means(x, y, a, gamma, delta):
    """Entropy mean dp/dPi', its convex weight theta and the log secant of Pi'.

    theta satisfies rho_hat = theta*x + (1-theta)*y.  s = dPi'/dlog(rho) is a
    mean of p'(rho), zero when either side is vacuum.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c1 = a * gamma / (gamma - 1.0)
    dp = a * _np_dpow(x, y, gamma)
    dpi = c1 * _np_dpow(x, y, gamma - 1.0)
    if delta != 0.0:
        dp = dp + delta * _np_dpow(x, y, 6.0)
        dpi = dpi + 1.2 * delta * _np_dpow(x, y, 5.0)
    rho_hat = np.empty_like(x)
    theta = np.full_like(x, 0.5)
    s = np.zeros_like(x)
    eq = x == y
    ne = ~eq
    rho_hat[eq] = x[eq]
    s[eq] = a * gamma * x[eq] ** (gamma - 1.0) + 6.0 * delta * x[eq] ** 5
    with np.errstate(divide="ignore", invalid="ignore"):
        rh = dp[ne] / dpi[ne]
        rho_hat[ne] = rh
        theta[ne] = (rh - y[ne]) / (x[ne] - y[ne])
        both = ne & (x > 0.0) & (y > 0.0)
        s[both] = dpi[both] / np.log1p((y[both] - x[both]) / x[both])
    return rho_hat, theta, s


def _np_log_mean(x, y):
    """Logarithmic mean and its convex weight theta (mean = theta*x + (1-theta)*y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = np.zeros_like(x)
    theta = np.full_like(x, 0.5)
    eq = x == y
    lam[eq] = x[eq]
    ok = (~eq) & (x > 0.0) & (y > 0.0)
    xo, yo = x[ok], y[ok]
    # log1p near the diagonal, plain logs when the ratio is far from 1
    near = np.abs(yo - xo) < 0.5 * xo
    r = np.where(near, yo - xo, 0.0) / xo
    d = np.where(near, np.log1p(r), np.log(yo) - np.log(xo))
    lo = (yo - xo) / d
    lam[ok] = lo
    theta[ok] = (lo - yo) / (xo - yo)
    # one side empty: mean is 0, weight irrelevant but keep it in [0, 1]
    return lam, theta


def _np_tridiag_solve(lower, diag, upper, rhs):
    n = diag.shape[0]
    if n == 1:
        return rhs / diag
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:
    njit = numba.njit(cache=True)

    @njit
    def _b_scalar(z):
        if z == 0.0:
            return 1.0
        if z > 700.0:
            return z * math.exp(-z)
        return z / math.expm1(z)

    @njit
    def _nb_bernoulli_1d(z):
        out = np.empty_like(z)
        for i in range(z.shape[0]):
            out[i] = _b_scalar(z[i])
        return out

    @njit
    def _nb_sg_weights_1d(s, a):
        n = s.shape[0]
        wl = np.empty(n)
        wr = np.empty(n)
        for i in range(n):
            if s[i] > 0.0:
                z = a[i] / s[i]
                wl[i] = s[i] * _b_scalar(z)
                wr[i] = s[i] * _b_scalar(-z)
            else:
                wl[i] = max(-a[i], 0.0)
                wr[i] = max(a[i], 0.0)
        return wl, wr

    @njit
    def _dpow_scalar(x, y, q):
        if x > 0.0:
            return x**q * math.expm1(q * math.log1p((y - x) / x))
        return y**q

    @njit
    def _nb_rho_face_means_1d(x, y, a, gamma, delta):
        n = x.shape[0]
        rho_hat = np.empty(n)
        theta = np.empty(n)
        s = np.empty(n)
        c1 = a * gamma / (gamma - 1.0)
        for i in range(n):
            xi = x[i]
            yi = y[i]
            if xi == yi:
                rho_hat[i] = xi
                theta[i] = 0.5
                s[i] = a * gamma * xi ** (gamma - 1.0) + 6.0 * delta * xi**5
                continue
            dp = a * _dpow_scalar(xi, yi, gamma)
            dpi = c1 * _dpow_scalar(xi, yi, gamma - 1.0)
            if delta != 0.0:
                dp += delta * _dpow_scalar(xi, yi, 6.0)
                dpi += 1.2 * delta * _dpow_scalar(xi, yi, 5.0)
            rh = dp / dpi
            rho_hat[i] = rh
            theta[i] = (rh - yi) / (xi - yi)
            if xi > 0.0 and yi > 0.0:
                s[i] = dpi / math.log1p((yi - xi) / xi)
            else:
                s[i] = 0.0
        return rho_hat, theta, s

    @njit
    def _nb_log_mean_1d(x, y):
        n = x.shape[0]
        lam = np.empty(n)
        theta = np.empty(n)
        for i in range(n):
            xi = x[i]
            yi = y[i]
            theta[i] = 0.5
            if xi == yi:
                lam[i] = xi
            elif xi > 0.0 and yi > 0.0:
                if abs(yi - xi) < 0.5 * xi:
                    d = math.log1p((yi - xi) / xi)
                else:
                    d = math.log(yi) - math.log(xi)
                lo = (yi - xi) / d
                lam[i] = lo
                theta[i] = (lo - yi) / (xi - yi)
            else:
                lam[i] = 0.0
        return lam, theta

    @njit
    def _nb_tridiag_solve(lower, diag, upper, rhs):
        # Thomas algorithm; for M-matrices every update is a sum of
        # nonnegative terms so nonnegative data stay nonnegative.
        n = diag.shape[0]
        cp = np.empty(n)
        dp = np.empty(n)
        x = np.empty(n)
        cp[0] = upper[0] / diag[0]
        dp[0] = rhs[0] / diag[0]
        for i in range(1, n):
            m = diag[i] - lower[i] * cp[i - 1]
            cp[i] = upper[i] / m
            dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m
        x[n - 1] = dp[n - 1]
        for i in range(n - 2, -1, -1):
            x[i] = dp[i] - cp[i] * x[i + 1]
        return x


def _flat(fn):
    """Apply a 1D-array numba kernel to arrays of any shape."""

    def wrapper(*arrays_and_scalars):
        arrs = []
        shape = None
        for v in arrays_and_scalars:
            if isinstance(v, np.ndarray):
                shape = v.shape
                arrs.append(np.ascontiguousarray(v, dtype=float).ravel())
            else:
                arrs.append(float(v))
        out = fn(*arrs)
        if isinstance(out, tuple):
            return tuple(o.reshape(shape) for o in out)
        return out.reshape(shape)

    wrapper.__name__ = getattr(fn, "__name__", "kernel")
    return wrapper


NUMPY_KERNELS = {
    "bernoulli": _np_bernoulli,
    "sg_weights": _np_sg_weights,
    "rho_face_means": _np_rho_face_means,
    "log_mean": _np_log_mean,
    "tridiag_solve": _np_tridiag_solve,
}

if _HAVE_NUMBA:
    NUMBA_KERNELS = {
        "bernoulli": _flat(_nb_bernoulli_1d),
        "sg_weights": _flat(_nb_sg_weights_1d),
        "rho_face_means": _flat(_nb_rho_face_means_1d),
        "log_mean": _flat(_nb_log_mean_1d),
        "tridiag_solve": _nb_tridiag_solve,
    }
else:  # pragma: no cover
    NUMBA_KERNELS = dict(NUMPY_KERNELS)

_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


def _asarr(v):
    return np.asarray(v, dtype=float)


def bernoulli(z):
    """B(z) = z / (exp(z) - 1) with B(0) = 1."""
    return _ACTIVE["bernoulli"](_asarr(z))


def sg_weights(s, a):
    return _ACTIVE["sg_weights"](_asarr(s), _asarr(a))


def rho_face_means(x, y, a, gamma, delta):
    return _ACTIVE["rho_face_means"](_asarr(x), _asarr(y), a, gamma, delta)


def log_mean(x, y):
    return _ACTIVE["log_mean"](_asarr(x), _asarr(y))


def tridiag_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system. lower[0] and upper[-1] are ignored."""
    return _ACTIVE["tridiag_solve"](_asarr(lower), _asarr(diag), _asarr(upper), _asarr(rhs))
