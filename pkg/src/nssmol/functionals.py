"""Pressure, energy, dissipation and mass functionals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, operators
from .model import ENTROPY_FLOOR, Grid, PhysParams, PotentialField, SimState


def pressure(rho, params: PhysParams):
    """p_delta(rho) = a rho^gamma + delta rho^6."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("pressure: negative density")
    return params.a * rho**params.gamma + params.delta * rho**6


def pressure_potential(rho, params: PhysParams):
    """Pi_delta with Pi'' = p'/rho: a/(gamma-1) rho^gamma + delta/5 rho^6."""
    rho = np.asarray(rho, dtype=float)
    return params.a / (params.gamma - 1.0) * rho**params.gamma + params.delta / 5.0 * rho**6


def enthalpy(rho, params: PhysParams):
    """Pi'_delta(rho)."""
    rho = np.asarray(rho, dtype=float)
    g = params.gamma
    return params.a * g / (g - 1.0) * rho ** (g - 1.0) + 1.2 * params.delta * rho**5


def entropy_density(eta):
    """eta log eta with 0 log 0 = 0 (values below the floor count as zero)."""
    eta = np.asarray(eta, dtype=float)
    out = np.zeros_like(eta)
    pos = eta > ENTROPY_FLOOR
    out[pos] = eta[pos] * np.log(eta[pos])
    return out


@dataclass
class EnergyParts:
    kinetic: float
    pressure: float
    entropy: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.pressure + self.entropy + self.potential


def kinetic_density(state: SimState, grid: Grid) -> np.ndarray:
    floor = state.vacuum_floor(grid)
    live = state.rho > floor
    ke = np.zeros(grid.shape)
    m2 = np.sum(state.momentum**2, axis=0)
    ke[live] = 0.5 * m2[live] / state.rho[live]
    return ke


def total_energy(state: SimState, pot: PotentialField, params: PhysParams) -> EnergyParts:
    grid = pot.grid
    if np.any(state.rho < 0) or np.any(state.eta < 0):
        raise ValueError("total_energy: negative density")
    V = grid.cell_volume
    return EnergyParts(
        kinetic=float(np.sum(kinetic_density(state, grid)) * V),
        pressure=float(np.sum(pressure_potential(state.rho, params)) * V),
        entropy=float(np.sum(entropy_density(state.eta)) * V),
        potential=float(np.sum((params.beta * state.rho + state.eta) * pot.phi) * V),
    )


def dissipation(state: SimState, pot: PotentialField, params: PhysParams):
    """Return (viscous, particle) parts of the discrete dissipation.

    The viscous part is the quadratic form of the discrete viscous operator
    (compact face gradients, no-slip ghosts).  The particle part sums
    (2 d sqrt(eta) + avg(sqrt(eta)) d phi)^2 / dx^2 over interior faces.
    """
    grid = pot.grid
    u = state.velocity(grid)
    visc = operators.viscous_dissipation(grid, u, params.mu, params.lam)
    V = grid.cell_volume
    sq = np.sqrt(np.maximum(state.eta, 0.0))
    part = 0.0
    for ax, dx in enumerate(grid.spacing):
        d = pot.face_diff(ax)
        k = _kernels.bernoulli(-np.abs(d)) * np.exp(-0.5 * np.abs(d))
        q = 0.25 * d
        f = 2.0 * (sq[_sl(grid.dim, ax, 1, None)] * np.exp(q) - sq[_sl(grid.dim, ax, None, -1)] * np.exp(-q)) / dx
        f = f * np.sqrt(k)
        part += float(np.sum(f**2) * V)
    return visc, part


def masses(state: SimState, grid: Grid):
    return grid.integrate(state.rho), grid.integrate(state.eta)


def _sl(dim, axis, start, stop):
    idx = [slice(None)] * dim
    idx[axis] = slice(start, stop)
    return tuple(idx)
