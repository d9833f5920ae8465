"""Grid operators: face averages and differences, the viscous operator and
assembly/solution of the face-flux linear systems used by the stepper."""

from __future__ import annotations

from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import _kernels
from .model import Grid


class LinearSolveError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


def sl(dim: int, axis: int, start, stop) -> tuple:
    idx = [slice(None)] * dim
    idx[axis] = slice(start, stop)
    return tuple(idx)


def left(f, axis):
    return f[sl(f.ndim, axis, None, -1)]


def right(f, axis):
    return f[sl(f.ndim, axis, 1, None)]


def face_avg(f: np.ndarray, axis: int) -> np.ndarray:
    """Average of the two cells sharing each interior face."""
    return 0.5 * (left(f, axis) + right(f, axis))


def pad_faces(g: np.ndarray, axis: int) -> np.ndarray:
    """Extend interior-face data with zeros on the two boundary faces."""
    pw = [(0, 0)] * g.ndim
    pw[axis] = (1, 1)
    return np.pad(g, pw)


def div_faces(fluxes: Sequence[np.ndarray], grid: Grid) -> np.ndarray:
    """Divergence of interior-face fluxes (zero normal flux on the boundary)."""
    out = np.zeros(grid.shape)
    for ax, (f, dx) in enumerate(zip(fluxes, grid.spacing)):
        out += np.diff(pad_faces(f, ax), axis=ax) / dx
    return out


def cell_from_faces(t: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """(T_{i+1/2} + T_{i-1/2}) / (2 dx) with T = 0 on boundary faces.

    Adjoint (up to sign) of the face-averaged discrete divergence, so it is
    the collocated gradient matching ``div_h``.
    """
    tp = pad_faces(t, axis)
    return (left(tp, axis) + right(tp, axis)) / (2.0 * dx)


def div_h(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Collocated divergence from face-averaged velocity, u_face = 0 on walls."""
    return div_faces([face_avg(u[ax], ax) for ax in range(grid.dim)], grid)


def grad_h(f: np.ndarray, grid: Grid) -> np.ndarray:
    return np.stack([cell_from_faces(np.diff(f, axis=ax), ax, dx) for ax, dx in enumerate(grid.spacing)])


# ---------------------------------------------------------------------------
# viscous operator
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _axis_mats(n: int, dx: float):
    # ghost padding for no-slip: ghost = -interior neighbour
    P = sp.lil_matrix((n + 2, n))
    P[0, 0] = -1.0
    for i in range(n):
        P[i + 1, i] = 1.0
    P[n + 1, n - 1] = -1.0
    P = P.tocsr()
    D = sp.diags([-np.ones(n + 1), np.ones(n + 1)], [0, 1], shape=(n + 1, n + 2)) / dx
    A = sp.diags([0.5 * np.ones(n + 1), 0.5 * np.ones(n + 1)], [0, 1], shape=(n + 1, n + 2))
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    return (D @ P).tocsr(), (A @ P).tocsr(), w


@lru_cache(maxsize=64)
def _visc_parts(grid: Grid):
    mats = [_axis_mats(n, dx) for n, dx in zip(grid.cells, grid.spacing)]
    V = grid.cell_volume
    if grid.dim == 1:
        G, _, w = mats[0]
        grads = [(G, w * V)]
        Dv = G
        wv = w * V
    else:
        (Gx, Ax, wx), (Gy, Ay, wy) = mats
        nx, ny = grid.cells
        Ix, Iy = sp.identity(nx), sp.identity(ny)
        grads = [
            (sp.kron(Gx, Iy).tocsr(), np.kron(wx, np.ones(ny)) * V),
            (sp.kron(Ix, Gy).tocsr(), np.kron(np.ones(nx), wy) * V),
        ]
        Dv = sp.hstack([sp.kron(Gx, Ay), sp.kron(Ax, Gy)]).tocsr()
        wv = np.kron(wx, wy) * V
    return grads, Dv, wv


@lru_cache(maxsize=64)
def viscous_matrix(grid: Grid, mu: float, lam: float) -> sp.csr_matrix:
    """Matrix of mu*Lap_h u + lam*grad(div u) acting on the stacked velocity.

    Built as minus the gradient of the discrete dissipation quadratic form,
    hence symmetric and negative semidefinite.
    """
    grads, Dv, wv = _visc_parts(grid)
    n = grid.n_cells
    V = grid.cell_volume
    lap = sp.csr_matrix((n, n))
    for G, w in grads:
        lap = lap + G.T @ sp.diags(w) @ G
    L = -mu * sp.kron(sp.identity(grid.dim), lap) / V
    if lam != 0.0:
        L = L - lam * (Dv.T @ sp.diags(wv) @ Dv) / V
    return sp.csr_matrix(L)


@lru_cache(maxsize=64)
def viscous_tridiag(grid: Grid, mu: float, lam: float):
    L = viscous_matrix(grid, mu, lam)
    return (
        np.concatenate([[0.0], L.diagonal(-1)]),
        L.diagonal(0).copy(),
        np.concatenate([L.diagonal(1), [0.0]]),
    )


def viscous_apply(grid: Grid, u: np.ndarray, mu: float, lam: float) -> np.ndarray:
    L = viscous_matrix(grid, float(mu), float(lam))
    return (L @ u.reshape(-1)).reshape(u.shape)


def viscous_dissipation(grid: Grid, u: np.ndarray, mu: float, lam: float) -> float:
    """mu * sum |grad u|^2 + lam * sum |div u|^2 with the operator's own stencils."""
    grads, Dv, wv = _visc_parts(grid)
    flat = u.reshape(grid.dim, -1)
    total = 0.0
    for c in range(grid.dim):
        for G, w in grads:
            g = G @ flat[c]
            total += mu * float(np.dot(w, g * g))
    if lam != 0.0:
        d = Dv @ u.reshape(-1)
        total += lam * float(np.dot(wv, d * d))
    return total


# ---------------------------------------------------------------------------
# face-flux linear systems
# ---------------------------------------------------------------------------


def _check(Amul, x, rhs, tol, label):
    r = Amul(x) - rhs
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    res = float(np.max(np.abs(r))) / scale
    if not np.all(np.isfinite(x)) or res > tol:
        raise LinearSolveError(f"{label}: linear residual {res:.3e} > {tol:.1e}", res)
    return res


def face_tridiag(grid: Grid, d0: np.ndarray, coefs: Sequence[Tuple[np.ndarray, np.ndarray]], h: float):
    """Tridiagonal form of diag(d0) + h*div(cL x_L - cR x_R) in 1D."""
    (cL, cR), = coefs
    k = h / grid.spacing[0]
    n = grid.cells[0]
    diag = np.array(d0, dtype=float).copy()
    lower = np.zeros(n)
    upper = np.zeros(n)
    diag[:-1] += k * cL
    upper[:-1] -= k * cR
    diag[1:] += k * cR
    lower[1:] -= k * cL
    return lower, diag, upper


def face_sparse(grid: Grid, d0: np.ndarray, coefs, h: float) -> sp.csr_matrix:
    n = grid.n_cells
    idx = np.arange(n).reshape(grid.shape)
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.asarray(d0, float).reshape(-1)]
    for ax, ((cL, cR), dx) in enumerate(zip(coefs, grid.spacing)):
        k = h / dx
        iL = left(idx, ax).reshape(-1)
        iR = right(idx, ax).reshape(-1)
        a = k * cL.reshape(-1)
        b = k * cR.reshape(-1)
        rows += [iL, iL, iR, iR]
        cols += [iL, iR, iL, iR]
        vals += [a, -b, -a, b]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def solve_scalar(grid: Grid, d0, coefs, h: float, rhs: np.ndarray, tol: float, label: str) -> np.ndarray:
    if grid.dim == 1:
        lo, di, up = face_tridiag(grid, d0, coefs, h)
        x = _kernels.tridiag_solve(lo, di, up, rhs)
        _check(lambda v: _tri_mul(lo, di, up, v), x, rhs, tol, label)
        return x
    A = face_sparse(grid, d0, coefs, h)
    x = spsolve(A.tocsc(), rhs.reshape(-1))
    _check(lambda v: A @ v, x, rhs.reshape(-1), tol, label)
    return x.reshape(grid.shape)


def solve_momentum(grid: Grid, rho, coefs, h: float, mu: float, lam: float, rhs: np.ndarray, tol: float):
    """Solve rho*u + h*div(G) - h*visc(u) = rhs, G = cL u_L - cR u_R per component."""
    if grid.dim == 1:
        lo, di, up = face_tridiag(grid, rho, coefs, h)
        vl, vd, vu = viscous_tridiag(grid, float(mu), float(lam))
        lo, di, up = lo - h * vl, di - h * vd, up - h * vu
        x = _kernels.tridiag_solve(lo, di, up, rhs[0])
        _check(lambda v: _tri_mul(lo, di, up, v), x, rhs[0], tol, "momentum")
        return x[None]
    A1 = face_sparse(grid, rho, coefs, h)
    A = sp.kron(sp.identity(grid.dim), A1) - h * viscous_matrix(grid, float(mu), float(lam))
    A = A.tocsc()
    b = rhs.reshape(-1)
    x = spsolve(A, b)
    _check(lambda v: A @ v, x, b, tol, "momentum")
    return x.reshape(rhs.shape)


def _tri_mul(lo, di, up, v):
    out = di * v
    out[1:] += lo[1:] * v[:-1]
    out[:-1] += up[:-1] * v[1:]
    return out
