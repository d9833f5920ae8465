"""Core data types: grid, physical parameters, state, potential, energy ledger."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

ENTROPY_FLOOR = 1e-30
VACUUM_FACTOR = 1e-12


class ValidationError(ValueError):
    """Invalid user-supplied configuration or data."""


def _as_tuple(v, dim: int, cast=float) -> tuple:
    if np.isscalar(v):
        return tuple(cast(v) for _ in range(dim))
    t = tuple(cast(x) for x in v)
    if len(t) != dim:
        raise ValidationError(f"expected {dim} entries, got {len(t)}")
    return t


@dataclass(frozen=True)
class Grid:
    """Uniform Cartesian cell grid on a box. Fields have shape ``grid.shape``."""

    dim: int
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    cells: Tuple[int, ...]
    boundary: str = "bounded"  # or "truncated-unbounded"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}")
        object.__setattr__(self, "lo", _as_tuple(self.lo, self.dim))
        object.__setattr__(self, "hi", _as_tuple(self.hi, self.dim))
        object.__setattr__(self, "cells", _as_tuple(self.cells, self.dim, int))
        for a, b in zip(self.lo, self.hi):
            if not (math.isfinite(a) and math.isfinite(b) and b > a):
                raise ValidationError(f"degenerate box side ({a}, {b})")
        for n in self.cells:
            if n < 2:
                raise ValidationError("need at least 2 cells per direction")
        if self.boundary not in ("bounded", "truncated-unbounded"):
            raise ValidationError(f"unknown boundary kind {self.boundary!r}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.cells

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple((b - a) / n for a, b, n in zip(self.lo, self.hi, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in zip(self.lo, self.hi)]))

    def centers(self) -> List[np.ndarray]:
        return [a + (np.arange(n) + 0.5) * d for a, n, d in zip(self.lo, self.cells, self.spacing)]

    def mesh(self) -> List[np.ndarray]:
        return list(np.meshgrid(*self.centers(), indexing="ij"))

    def radius(self) -> np.ndarray:
        """Euclidean distance of each cell center from the origin."""
        return np.sqrt(sum(x**2 for x in self.mesh()))

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_volume)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.lo, self.hi, tuple(n * factor for n in self.cells), self.boundary)


@dataclass(frozen=True)
class PhysParams:
    a: float = 1.0
    gamma: float = 2.0
    mu: float = 1.0
    lam: float = 0.0
    beta: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("a", "gamma", "mu", "lam", "beta", "delta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"{name} must be finite")
        if self.a <= 0:
            raise ValidationError("a must be > 0")
        if self.gamma <= 1.0:
            raise ValidationError("gamma must be > 1")
        if self.mu <= 0:
            raise ValidationError("mu must be > 0")
        if self.lam + 2.0 * self.mu / 3.0 < 0:
            raise ValidationError("lambda + 2 mu / 3 must be >= 0")
        if self.beta == 0:
            raise ValidationError("beta must be nonzero")
        if self.delta < 0:
            raise ValidationError("delta must be >= 0")

    @property
    def theta(self) -> float:
        """Higher-integrability exponent min(2 gamma / 3 - 1, 1/4)."""
        return min(2.0 * self.gamma / 3.0 - 1.0, 0.25)

    def with_delta(self, delta: float) -> "PhysParams":
        return PhysParams(self.a, self.gamma, self.mu, self.lam, self.beta, float(delta))


@dataclass
class SimState:
    rho: np.ndarray
    momentum: np.ndarray  # shape (dim, *grid.shape)
    eta: np.ndarray
    time: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.rho.copy(), self.momentum.copy(), self.eta.copy(), self.time)

    def vacuum_floor(self, grid: Grid) -> float:
        return VACUUM_FACTOR * grid.integrate(self.rho) / grid.volume

    def velocity(self, grid: Grid) -> np.ndarray:
        """m / rho where rho exceeds the vacuum floor, else 0."""
        floor = self.vacuum_floor(grid)
        live = self.rho > floor
        u = np.zeros_like(self.momentum)
        if np.any(live):
            u[:, live] = self.momentum[:, live] / self.rho[live]
        return u

    @classmethod
    def from_velocity(cls, rho, u, eta, time=0.0) -> "SimState":
        rho = np.asarray(rho, dtype=float)
        u = np.asarray(u, dtype=float)
        if u.ndim == rho.ndim:
            u = u[None]
        return cls(rho.copy(), rho[None] * u, np.asarray(eta, dtype=float).copy(), float(time))


def check_state(state: SimState, grid: Grid) -> None:
    if state.rho.shape != grid.shape or state.eta.shape != grid.shape:
        raise ValidationError("state fields do not match the grid")
    if state.momentum.shape != (grid.dim,) + grid.shape:
        raise ValidationError("momentum has the wrong shape")
    for name in ("rho", "momentum", "eta"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise ValidationError(f"{name} contains non-finite values")
    if np.any(state.rho < 0) or np.any(state.eta < 0):
        raise ValidationError("densities must be nonnegative")


@dataclass
class PotentialField:
    """Cell-centered potential, shifted to be nonnegative (by default min phi = 0).

    grad_phi is a list (one entry per axis) of face-normal differences on all
    faces along that axis; boundary faces are linearly extrapolated.
    """

    grid: Grid
    phi: np.ndarray
    grad_phi: List[np.ndarray] = field(default_factory=list)
    lap_phi: Optional[np.ndarray] = None
    cell_grad: Optional[np.ndarray] = None
    boundary_flag: np.ndarray = None
    shift: float = 0.0

    @classmethod
    def from_samples(cls, grid: Grid, phi, shift: Optional[float] = None) -> "PotentialField":
        """Build from cell-center samples, subtracting ``shift`` (default: the sample minimum)."""
        phi = np.array(phi, dtype=float)
        if phi.shape != grid.shape:
            raise ValidationError(f"potential has shape {phi.shape}, grid is {grid.shape}")
        if not np.all(np.isfinite(phi)):
            raise ValidationError("potential has non-finite samples")
        if shift is None:
            shift = float(phi.min())
        if phi.min() < shift:
            raise ValidationError("shift exceeds the smallest potential sample")
        phi = phi - shift
        grads = []
        lap = np.zeros(grid.shape)
        for ax, dx in enumerate(grid.spacing):
            g = np.diff(phi, axis=ax) / dx
            n = phi.shape[ax]
            if n >= 3:
                first = 2 * np.take(g, [0], axis=ax) - np.take(g, [1], axis=ax)
                last = 2 * np.take(g, [-1], axis=ax) - np.take(g, [-2], axis=ax)
            else:
                first = np.take(g, [0], axis=ax)
                last = np.take(g, [-1], axis=ax)
            gf = np.concatenate([first, g, last], axis=ax)
            grads.append(gf)
            lap += np.diff(gf, axis=ax) / dx
        cell_grad = np.stack([np.gradient(phi, dx, axis=ax) for ax, dx in enumerate(grid.spacing)])
        flag = np.zeros(grid.shape, dtype=bool)
        for ax in range(grid.dim):
            idx = [slice(None)] * grid.dim
            idx[ax] = 0
            flag[tuple(idx)] = True
            idx[ax] = -1
            flag[tuple(idx)] = True
        return cls(grid, phi, grads, lap, cell_grad, flag, shift)

    @classmethod
    def zero(cls, grid: Grid) -> "PotentialField":
        return cls.from_samples(grid, np.zeros(grid.shape))

    def face_diff(self, axis: int) -> np.ndarray:
        """Phi_R - Phi_L on interior faces along ``axis``."""
        return np.diff(self.phi, axis=axis)


# ---------------------------------------------------------------------------
# energy ledger
# ---------------------------------------------------------------------------

LEDGER_COLUMNS = (
    "time",
    "mass_rho",
    "mass_eta",
    "E_total",
    "E_kinetic",
    "E_pressure",
    "E_entropy",
    "E_potential",
    "dissipation",
    "ineq_margin",
)


@dataclass
class LedgerRow:
    time: float
    mass_rho: float
    mass_eta: float
    E_total: float
    E_kinetic: float
    E_pressure: float
    E_entropy: float
    E_potential: float
    dissipation_visc: float
    dissipation_eta: float
    ineq_residual: float
    h: float = 0.0

    @property
    def dissipation(self) -> float:
        return self.dissipation_visc + self.dissipation_eta

    def values(self) -> tuple:
        return (
            self.time,
            self.mass_rho,
            self.mass_eta,
            self.E_total,
            self.E_kinetic,
            self.E_pressure,
            self.E_entropy,
            self.E_potential,
            self.dissipation,
            self.ineq_residual,
        )


@dataclass
class EnergyLedger:
    """Per-step record; ``ineq_residual`` is E_prev - E - h*D (>= -slack when accepted)."""

    rows: List[LedgerRow] = field(default_factory=list)

    def append(self, row: LedgerRow) -> None:
        if self.rows and row.time < self.rows[-1].time:
            raise ValueError("ledger rows must be time-ordered")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name == "dissipation":
            return np.array([r.dissipation for r in self.rows])
        return np.array([getattr(r, name) for r in self.rows])

    def as_array(self) -> np.ndarray:
        return np.array([r.values() for r in self.rows]).reshape(-1, len(LEDGER_COLUMNS))


def trajectory_times(rows: Sequence[LedgerRow]) -> np.ndarray:
    return np.array([r.time for r in rows])
