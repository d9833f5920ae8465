"""Closed-form stationary states, their residuals and confinement checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import ndimage

from . import _kernels
from .functionals import enthalpy, pressure
from .model import Grid, PhysParams, PotentialField, ValidationError

N_LEVELS = 16
TAIL_SHELL = 0.10
TAIL_FRACTION = 0.05
GROWTH_RADIUS = 0.5


class RootFindError(RuntimeError):
    pass


def solve_eta_s(pot: PotentialField, mass_eta: float):
    """eta_s = C exp(-Phi) with C = M / int exp(-Phi). Returns (eta_s, C)."""
    if not (mass_eta > 0 and math.isfinite(mass_eta)):
        raise ValidationError("particle mass must be positive")
    w = np.exp(-pot.phi)
    z = pot.grid.integrate(w)
    if not (z > 0 and math.isfinite(z)):
        raise RootFindError("int exp(-Phi) is not positive and finite")
    c = mass_eta / z
    return c * w, c


def _invert_enthalpy(target: np.ndarray, params: PhysParams) -> np.ndarray:
    """rho >= 0 with Pi'_delta(rho) = max(target, 0)."""
    t = np.maximum(target, 0.0)
    g = params.gamma
    c1 = params.a * g / (g - 1.0)
    rho = (t / c1) ** (1.0 / (g - 1.0))
    if params.delta == 0.0:
        return rho
    # the delta term only lowers rho; bisect in [0, rho_no_delta]
    lo = np.zeros_like(rho)
    hi = rho.copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        big = enthalpy(mid, params) > t
        hi = np.where(big, mid, hi)
        lo = np.where(big, lo, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(hi, 1e-300)):
            break
    return 0.5 * (lo + hi)


def rho_profile(pot: PotentialField, params: PhysParams, c_rho: float) -> np.ndarray:
    """((gamma-1)/(a gamma) [C - beta Phi]^+)^(1/(gamma-1)), generalized to delta > 0."""
    return _invert_enthalpy(c_rho - params.beta * pot.phi, params)


def solve_rho_s(pot: PotentialField, params: PhysParams, mass_rho: float, rtol: float = 1e-10):
    """Density profile with prescribed mass; the level C is found by bisection.

    Returns (rho_s, C_rho).  The bracket starts at min(beta Phi), where the
    mass is zero, and its upper end doubles until it holds enough mass.
    """
    if not (mass_rho > 0 and math.isfinite(mass_rho)):
        raise ValidationError("fluid mass must be positive")
    grid = pot.grid
    bphi = params.beta * pot.phi
    lo = float(bphi.min())

    def mass(c):
        return grid.integrate(rho_profile(pot, params, c))

    width = max(1.0, float(bphi.max() - bphi.min()))
    hi = lo + width
    for _ in range(400):
        if mass(hi) >= mass_rho:
            break
        width *= 2.0
        hi = lo + width
    else:
        raise RootFindError("could not bracket the fluid level")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if mass(mid) < mass_rho:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)
    rho = rho_profile(pot, params, c)
    if abs(grid.integrate(rho) - mass_rho) > rtol * mass_rho:
        raise RootFindError("bisection did not reach the mass tolerance")
    return rho, c


def stationary_residual(rho_s, eta_s, pot: PotentialField, params: PhysParams) -> Dict[str, float]:
    """Max-norm face residuals of grad p + beta rho grad Phi and grad eta + eta grad Phi.

    Faces touching vacuum cells are skipped.  ``eta_sg`` is the exponentially
    fitted flux used by the scheme, which vanishes exactly on eta ~ exp(-Phi).
    """
    grid = pot.grid
    p = pressure(rho_s, params)
    r_rho = 0.0
    r_eta = 0.0
    r_sg = 0.0
    for ax, dx in enumerate(grid.spacing):
        dphi = pot.face_diff(ax)
        sl_l = _sl(grid.dim, ax, None, -1)
        sl_r = _sl(grid.dim, ax, 1, None)
        rl, rr = rho_s[sl_l], rho_s[sl_r]
        live = (rl > 0) & (rr > 0)
        fr = (np.diff(p, axis=ax) + params.beta * 0.5 * (rl + rr) * dphi) / dx
        if np.any(live):
            r_rho = max(r_rho, float(np.max(np.abs(fr[live]))))
        el, er = eta_s[sl_l], eta_s[sl_r]
        fe = (er - el + 0.5 * (el + er) * dphi) / dx
        r_eta = max(r_eta, float(np.max(np.abs(fe))))
        bl, br = _kernels.sg_weights(np.ones_like(dphi), dphi)
        r_sg = max(r_sg, float(np.max(np.abs(bl * el - br * er))) / dx)
    return {"rho": r_rho, "eta": r_eta, "eta_sg": r_sg}


def _sl(dim, ax, a, b):
    idx = [slice(None)] * dim
    idx[ax] = slice(a, b)
    return tuple(idx)


@dataclass
class StationaryResult:
    rho_s: np.ndarray
    eta_s: np.ndarray
    c_rho: float
    c_eta: float
    mass_rho: float
    mass_eta: float
    residuals: Dict[str, float]

    def report_text(self) -> str:
        lines = [
            "Stationary state",
            f"  fluid level C_rho    {self.c_rho:.17g}",
            f"  particle level C_eta {self.c_eta:.17g}",
            f"  fluid mass           {self.mass_rho:.17g}",
            f"  particle mass        {self.mass_eta:.17g}",
            f"  vacuum cells         {int(np.sum(self.rho_s <= 0))}",
            "",
            "[values]",
            f"c_rho = {self.c_rho!r}",
            f"c_eta = {self.c_eta!r}",
            f"mass_rho = {self.mass_rho!r}",
            f"mass_eta = {self.mass_eta!r}",
        ]
        for k, v in self.residuals.items():
            lines.append(f"residual_{k} = {v!r}")
        return "\n".join(lines) + "\n"


def solve_stationary(pot: PotentialField, params: PhysParams, mass_rho: float, mass_eta: float) -> StationaryResult:
    rho_s, c_rho = solve_rho_s(pot, params, mass_rho)
    eta_s, c_eta = solve_eta_s(pot, mass_eta)
    res = stationary_residual(rho_s, eta_s, pot, params)
    return StationaryResult(rho_s, eta_s, c_rho, c_eta, mass_rho, mass_eta, res)


# ---------------------------------------------------------------------------
# confinement
# ---------------------------------------------------------------------------


@dataclass
class ConfinementReport:
    passed: bool
    checks: Dict[str, bool]
    failing_level: Optional[float] = None
    n_components: Optional[int] = None
    tail_fraction: Optional[float] = None
    growth: Dict[str, float] = field(default_factory=dict)
    levels: List[float] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = ["Potential confinement check", f"  overall: {'PASS' if self.passed else 'FAIL'}"]
        for k, v in self.checks.items():
            lines.append(f"  {k:<22s} {'pass' if v else 'FAIL'}")
        lines += [f"  note: {n}" for n in self.notes]
        lines += ["", "[values]"]
        lines += self.to_kv()
        return "\n".join(lines) + "\n"

    def to_kv(self) -> List[str]:
        kv = [f"passed = {str(self.passed).lower()}"]
        kv += [f"check_{k} = {str(v).lower()}" for k, v in self.checks.items()]
        if self.failing_level is not None:
            kv.append(f"failing_level = {self.failing_level!r}")
            kv.append(f"n_components = {self.n_components}")
        if self.tail_fraction is not None:
            kv.append(f"tail_fraction = {self.tail_fraction!r}")
        kv += [f"{k} = {v!r}" for k, v in self.growth.items()]
        return kv


def validate_confinement(pot: PotentialField, params: PhysParams) -> ConfinementReport:
    """Sublevel connectivity, lower bound and (truncated-unbounded only) tail,
    growth and buoyancy-sign checks of the potential."""
    grid = pot.grid
    phi = pot.phi
    checks: Dict[str, bool] = {}
    notes: List[str] = []
    checks["lower_bounded"] = bool(np.all(np.isfinite(phi)) and float(phi.min()) >= 0.0)

    levels = list(np.linspace(float(phi.min()), float(phi.max()), N_LEVELS))
    conn = True
    bad_level, ncomp = None, None
    for k in levels:
        mask = phi < k
        if not mask.any():
            continue
        _, n = ndimage.label(mask)  # default structure = face adjacency
        if n != 1:
            conn = False
            bad_level, ncomp = float(k), int(n)
            notes.append(f"sublevel set {{phi < {k:.6g}}} has {n} components")
            break
    checks["connected_sublevels"] = conn

    # growth fit, reported for every domain and enforced on unbounded ones
    r = grid.radius()
    R = GROWTH_RADIUS * float(r.max())
    outer = r > R
    gnorm = np.sqrt(np.sum(pot.cell_grad**2, axis=0))
    lap = np.abs(pot.lap_phi)
    growth = {"R": R}
    pos_out = bool(np.all(phi[outer] > 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = np.where(gnorm[outer] > 0, lap[outer] / gnorm[outer], np.where(lap[outer] > 1e-12, np.inf, 0.0))
        c2 = np.where(phi[outer] > 0, gnorm[outer] / phi[outer], np.inf)
    growth["c1"] = float(np.max(c1)) if c1.size else 0.0
    growth["c2"] = float(np.max(c2)) if c2.size else 0.0

    tail = None
    if grid.boundary == "truncated-unbounded":
        w = np.exp(-0.5 * phi)
        shell = r >= (1.0 - TAIL_SHELL) * float(r.max())
        tail = float(np.sum(w[shell]) / np.sum(w))
        checks["integrable_tail"] = tail < TAIL_FRACTION
        checks["growth"] = pos_out and math.isfinite(growth["c1"]) and math.isfinite(growth["c2"])
        checks["buoyancy_sign"] = params.beta > 0
        if params.beta <= 0:
            notes.append("beta must be positive on a truncated unbounded domain")
    else:
        notes.append("bounded domain: tail, growth and buoyancy checks not required")

    return ConfinementReport(
        passed=all(checks.values()), checks=checks, failing_level=bad_level, n_components=ncomp,
        tail_fraction=tail, growth=growth, levels=[float(x) for x in levels], notes=notes,
    )
