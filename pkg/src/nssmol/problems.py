"""Potentials and initial data built from configuration specs."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np

from .model import Grid, PhysParams, PotentialField, SimState, ValidationError

N_MODES = 8


def _nodes_and_centers(grid: Grid) -> List[np.ndarray]:
    axes = []
    for a, b, n in zip(grid.lo, grid.hi, grid.cells):
        nodes = np.linspace(a, b, n + 1)
        centers = 0.5 * (nodes[1:] + nodes[:-1])
        axes.append(np.sort(np.concatenate([nodes, centers])))
    return list(np.meshgrid(*axes, indexing="ij"))


def potential_from_function(grid: Grid, fn: Callable[..., np.ndarray]) -> PotentialField:
    """Sample fn at cell centers; shift by its minimum over centers and faces."""
    shift = float(np.min(fn(*_nodes_and_centers(grid))))
    return PotentialField.from_samples(grid, fn(*grid.mesh()), shift=min(shift, float(np.min(fn(*grid.mesh())))))


def potential_function(spec: Dict, grid: Grid) -> Callable[..., np.ndarray]:
    kind = spec["kind"]
    if kind == "linear":
        g = float(spec["g"])
        return lambda *x: g * x[-1]
    if kind == "quadratic":
        k = float(spec["k"])
        c = spec.get("center")
        c = np.zeros(grid.dim) if c is None else np.broadcast_to(np.asarray(c, float), (grid.dim,))
        return lambda *x: 0.5 * k * sum((xi - ci) ** 2 for xi, ci in zip(x, c))
    if kind == "double_well":
        s = float(spec["scale"])
        return lambda *x: s * ((x[0] ** 2 - 1.0) ** 2 + sum(xi**2 for xi in x[1:]))
    if kind == "zero":
        return lambda *x: np.zeros_like(x[0])
    raise ValidationError(f"unknown potential kind {kind!r}")


def read_table(path: str | Path) -> Dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if len(rows) < 2:
        raise ValidationError(f"{path}: table has no data rows")
    head = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if data.shape[1] != len(head):
        raise ValidationError(f"{path}: ragged table")
    return {h: data[:, i] for i, h in enumerate(head)}


def build_potential(spec: Dict, grid: Grid, base: Path | None = None) -> PotentialField:
    if spec["kind"] == "tabulated":
        path = Path(spec["file"])
        if base is not None and not path.is_absolute():
            path = base / path
        tab = read_table(path)
        if "phi" not in tab or tab["phi"].size != grid.n_cells:
            raise ValidationError(f"{path}: need a 'phi' column with {grid.n_cells} rows")
        return PotentialField.from_samples(grid, tab["phi"].reshape(grid.shape))
    return potential_from_function(grid, potential_function(spec, grid))


def perturbation(grid: Grid, seed: int) -> np.ndarray:
    """Seeded smooth field with max |xi| <= 1 (low cosine modes)."""
    rng = np.random.default_rng(seed)
    hat = [(x - a) / (b - a) for x, a, b in zip(grid.mesh(), grid.lo, grid.hi)]
    modes = [m for m in np.ndindex(*([N_MODES + 1] * grid.dim)) if any(m)]
    coef = rng.uniform(-1.0, 1.0, len(modes))
    coef /= np.sum(np.abs(coef))
    xi = np.zeros(grid.shape)
    for c, m in zip(coef, modes):
        term = np.ones(grid.shape)
        for k, xh in zip(m, hat):
            term = term * np.cos(k * np.pi * xh)
        xi += c * term
    return xi


def build_initial(spec: Dict, grid: Grid, pot: PotentialField, params: PhysParams,
                  base: Path | None = None) -> SimState:
    from .stationary import solve_eta_s, solve_rho_s

    kind = spec["kind"]
    zero_u = np.zeros((grid.dim,) + grid.shape)
    if kind == "uniform":
        rho = np.full(grid.shape, float(spec["rho0"]))
        eta = np.full(grid.shape, float(spec["eta0"]))
        return SimState(rho, zero_u, eta, 0.0)
    if kind in ("equilibrium", "perturbed_equilibrium"):
        rho, _ = solve_rho_s(pot, params, float(spec["mass_rho"]))
        eta, _ = solve_eta_s(pot, float(spec["mass_eta"]))
        if kind == "perturbed_equilibrium":
            amp = float(spec["amplitude"])
            seed = int(spec["seed"])
            rho = rho * (1.0 + amp * perturbation(grid, seed))
            eta = eta * (1.0 + amp * perturbation(grid, seed + 1))
        return SimState(rho, zero_u, eta, 0.0)
    if kind == "tabulated":
        path = Path(spec["file"])
        if base is not None and not path.is_absolute():
            path = base / path
        tab = read_table(path)
        names = ["u"] if grid.dim == 1 else ["u_x", "u_y"]
        for col in ["rho", "eta"] + names:
            if col not in tab or tab[col].size != grid.n_cells:
                raise ValidationError(f"{path}: need column {col!r} with {grid.n_cells} rows")
        rho = tab["rho"].reshape(grid.shape)
        u = np.stack([tab[c].reshape(grid.shape) for c in names])
        return SimState.from_velocity(rho, u, tab["eta"].reshape(grid.shape))
    raise ValidationError(f"unknown initial kind {kind!r}")


def initial_masses(spec: Dict, grid: Grid, state: SimState):
    if spec["kind"] == "equilibrium":
        return float(spec["mass_rho"]), float(spec["mass_eta"])
    return grid.integrate(state.rho), grid.integrate(state.eta)
