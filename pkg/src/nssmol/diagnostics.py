"""Energy audit, entropy bounds, weak-form residuals and large-time behaviour."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .functionals import entropy_density, pressure
from .model import ENTROPY_FLOOR, EnergyLedger, Grid, PhysParams, PotentialField, SimState

# ---------------------------------------------------------------------------
# energy audit
# ---------------------------------------------------------------------------


@dataclass
class AuditResult:
    passed: bool
    worst_step_margin: float
    worst_step_index: Optional[int]
    energy_bound_ok: bool
    dissipation_bound_ok: bool
    violations: List[int] = field(default_factory=list)
    slack: float = 0.0

    def to_text(self) -> str:
        lines = [
            "Energy inequality audit",
            f"  result                 {'PASS' if self.passed else 'FAIL'}",
            f"  per-step slack         {self.slack:.17g}",
            f"  worst step margin      {self.worst_step_margin:.17g}",
            f"  worst step index       {self.worst_step_index}",
            f"  E(t) <= E(0) bound     {'ok' if self.energy_bound_ok else 'violated'}",
            f"  cumulative dissipation {'ok' if self.dissipation_bound_ok else 'violated'}",
        ]
        if self.violations:
            lines.append("  violating steps: " + ", ".join(str(v) for v in self.violations[:20]))
        return "\n".join(lines) + "\n"


def energy_inequality_audit(ledger: EnergyLedger, slack: float) -> AuditResult:
    """Check E_k + h_k D_k <= E_{k-1} + slack per step and both cumulative forms."""
    rows = ledger.rows
    if not rows:
        raise ValueError("empty ledger")
    E = np.array([r.E_total for r in rows])
    margins = np.array([r.ineq_residual for r in rows[1:]])
    hd = np.array([r.h * r.dissipation for r in rows[1:]])
    viol = [int(i) + 1 for i in np.nonzero(margins < -slack)[0]]
    k = np.arange(len(E))
    e_ok = bool(np.all(E <= E[0] + k * slack))
    n = len(rows) - 1
    d_ok = bool(np.sum(hd) <= E[0] - E[-1] + n * slack)
    worst_i = int(np.argmin(margins)) + 1 if margins.size else None
    worst = float(margins.min()) if margins.size else 0.0
    return AuditResult(not viol and e_ok and d_ok, worst, worst_i, e_ok, d_ok, viol, slack)


# ---------------------------------------------------------------------------
# entropy bounds
# ---------------------------------------------------------------------------


@dataclass
class EntropyCheck:
    neg_part: float
    neg_bound: float
    free_energy: float
    free_energy_floor: float
    tol: float = 1e-10

    @property
    def margin_neg(self) -> float:
        return self.neg_bound - self.neg_part

    @property
    def margin_free(self) -> float:
        return self.free_energy - self.free_energy_floor

    @property
    def ok(self) -> bool:
        return self.margin_neg >= -self.tol and self.margin_free >= -self.tol


def entropy_bounds_check(eta: np.ndarray, pot: PotentialField, tol: float = 1e-10) -> EntropyCheck:
    """Quadrature check of the two entropy lower bounds.

    int eta log_- eta <= 1/2 int Phi eta + (1/e) int exp(-Phi/2), and
    int eta log eta + int Phi eta >= M log(M / int exp(-Phi)).
    Both hold cellwise or by Jensen, so they hold exactly for the quadrature.
    """
    grid = pot.grid
    phi = pot.phi
    if np.any(eta < 0):
        raise ValueError("negative particle density")
    h_eta = entropy_density(eta)
    neg = grid.integrate(np.maximum(-h_eta, 0.0))
    bound = 0.5 * grid.integrate(phi * eta) + grid.integrate(np.exp(-0.5 * phi)) / math.e
    M = grid.integrate(eta)
    z = grid.integrate(np.exp(-phi))
    free = grid.integrate(h_eta) + grid.integrate(phi * eta)
    floor = M * math.log(M / z) if M > ENTROPY_FLOOR else 0.0
    return EntropyCheck(neg, bound, free, floor, tol)


# ---------------------------------------------------------------------------
# weak-form residuals
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """All time levels of a run: fields[k] holds the state at times[k]."""

    grid: Grid
    times: np.ndarray
    rho: np.ndarray
    momentum: np.ndarray
    eta: np.ndarray

    @classmethod
    def from_states(cls, grid: Grid, states: Sequence[SimState]) -> "Trajectory":
        return cls(
            grid,
            np.array([s.time for s in states]),
            np.stack([s.rho for s in states]),
            np.stack([s.momentum for s in states]),
            np.stack([s.eta for s in states]),
        )

    def velocity(self) -> np.ndarray:
        floor = 1e-12 * self.rho.reshape(len(self.times), -1).sum(axis=1) * self.grid.cell_volume / self.grid.volume
        floor = floor.reshape((-1,) + (1,) * self.grid.dim)
        live = self.rho > floor
        u = np.zeros_like(self.momentum)
        safe = np.where(live, self.rho, 1.0)
        for c in range(self.grid.dim):
            u[:, c] = np.where(live, self.momentum[:, c] / safe, 0.0)
        return u


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def _bump(s, order):
    """exp(-1/(1-s^2)) on |s| < 1 and its first two derivatives."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    q = 1.0 - si * si
    b = np.exp(-1.0 / q)
    if order == 0:
        out[inside] = b
    elif order == 1:
        out[inside] = b * (-2.0 * si / q**2)
    else:
        d1 = -2.0 * si / q**2
        d1p = -2.0 / q**2 - 8.0 * si * si / q**3
        out[inside] = b * (d1 * d1 + d1p)
    return out


@dataclass(frozen=True)
class BumpFunction:
    t_center: float
    t_width: float
    centers: Tuple[float, ...]
    widths: Tuple[float, ...]

    def time_factor(self, t, order=0):
        return _bump((t - self.t_center) / self.t_width, order) / self.t_width**order

    def space_factor(self, axis, x, order=0):
        w = self.widths[axis]
        return _bump((x - self.centers[axis]) / w, order) / w**order


def bump_bank(grid: Grid, t_final: float, n: int = 6, seed: int = 0) -> List[BumpFunction]:
    """Seeded space-time bumps supported inside (0, t_final) x domain."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        tw = rng.uniform(0.2, 0.35) * t_final
        tc = rng.uniform(tw, t_final - tw)
        cs, ws = [], []
        for a, b in zip(grid.lo, grid.hi):
            L = b - a
            w = rng.uniform(0.2, 0.4) * L
            cs.append(rng.uniform(a + w, b - w))
            ws.append(w)
        out.append(BumpFunction(tc, tw, tuple(cs), tuple(ws)))
    return out


def _cell_integrals(grid: Grid, tf: BumpFunction, axis: int, order: int) -> np.ndarray:
    a, n, dx = grid.lo[axis], grid.cells[axis], grid.spacing[axis]
    left = a + np.arange(n) * dx
    pts = left[:, None] + 0.5 * dx * (_GL_X[None, :] + 1.0)
    vals = tf.space_factor(axis, pts, order)
    return 0.5 * dx * vals @ _GL_W


def _time_integrals(times: np.ndarray, tf: BumpFunction) -> Tuple[np.ndarray, np.ndarray]:
    """(int over (t_{k-1}, t_k] of T, T(t_k) - T(t_{k-1})) for k >= 1."""
    t0, t1 = times[:-1], times[1:]
    pts = t0[:, None] + 0.5 * (t1 - t0)[:, None] * (_GL_X[None, :] + 1.0)
    ints = 0.5 * (t1 - t0) * (tf.time_factor(pts) @ _GL_W)
    T = tf.time_factor(times)
    return ints, np.diff(T)


def _contract(f: np.ndarray, vecs: Sequence[np.ndarray]) -> np.ndarray:
    """sum over cells of f[k, i, j, ...] * v0[i] * v1[j] ... -> array over k."""
    out = f
    for v in reversed(vecs):
        out = out @ v
    return out


def weak_form_residuals(traj: Trajectory, pot: PotentialField, params: PhysParams,
                        bank: Sequence[BumpFunction]) -> Dict[str, np.ndarray]:
    """Space-time residuals of the three integral identities per test function.

    Fields are piecewise constant in space (cells) and in time (value of level
    k on (t_{k-1}, t_k]); test-function integrals are done by Gauss rules.
    Viscous terms are moved onto the test function.  Returns arrays of shape
    (len(bank),) for 'rho' and 'eta' and (len(bank), dim) for 'momentum'.
    """
    grid = traj.grid
    d = grid.dim
    u = traj.velocity()[1:]
    rho, m, eta = traj.rho[1:], traj.momentum[1:], traj.eta[1:]
    p = pressure(rho, params)
    gphi = pot.cell_grad
    r_rho = np.zeros(len(bank))
    r_eta = np.zeros(len(bank))
    r_m = np.zeros((len(bank), d))
    for j, tf in enumerate(bank):
        I, dT = _time_integrals(traj.times, tf)
        X = [[_cell_integrals(grid, tf, ax, o) for o in range(3)] for ax in range(d)]

        def vec(derivs):
            # derivs[ax] = derivative order along ax
            return [X[ax][derivs[ax]] for ax in range(d)]

        def e(a=None, b=None):
            o = [0] * d
            if a is not None:
                o[a] += 1
            if b is not None:
                o[b] += 1
            return vec(o)

        acc = np.dot(dT, _contract(rho, e()))
        for a in range(d):
            acc += np.dot(I, _contract(m[:, a], e(a)))
        r_rho[j] = acc

        acc = np.dot(dT, _contract(eta, e()))
        for a in range(d):
            flux = eta * u[:, a] - eta * gphi[a][None]
            acc += np.dot(I, _contract(flux, e(a)))
            acc += np.dot(I, _contract(eta, e(a, a)))
        r_eta[j] = acc

        for c in range(d):
            acc = np.dot(dT, _contract(m[:, c], e()))
            for a in range(d):
                acc += np.dot(I, _contract(rho * u[:, a] * u[:, c], e(a)))
                acc += params.mu * np.dot(I, _contract(u[:, c], e(a, a)))
                acc += params.lam * np.dot(I, _contract(u[:, a], e(a, c)))
            acc += np.dot(I, _contract(p + eta, e(c)))
            acc -= np.dot(I, _contract((eta + params.beta * rho) * gphi[c][None], e()))
            r_m[j, c] = acc
    return {"rho": r_rho, "momentum": r_m, "eta": r_eta}


# ---------------------------------------------------------------------------
# large-time behaviour
# ---------------------------------------------------------------------------


class UsageError(ValueError):
    pass


@dataclass
class AsymptoticsReport:
    times: np.ndarray
    metrics: Dict[str, np.ndarray]
    relative: Dict[str, np.ndarray]
    thresholds: Dict[str, float]
    converged: Dict[str, bool]
    trend: Dict[str, float]
    window_dissipation: List[Tuple[float, float]]

    @property
    def all_converged(self) -> bool:
        return all(self.converged.values())

    def to_text(self) -> str:
        lines = ["Large-time behaviour", f"  overall: {'CONVERGED' if self.all_converged else 'NOT CONVERGED'}"]
        for k in self.metrics:
            lines.append(
                f"  {k:<16s} final {self.metrics[k][-1]:.6e} (compared {self.relative[k][-1]:.6e} "
                f"< {self.thresholds[k]:.1e}) median trend {self.trend[k]:+.3e} -> "
                f"{'ok' if self.converged[k] else 'FAIL'}"
            )
        if self.window_dissipation:
            lines.append("  windowed dissipation int_{tau-1}^{tau+2} D:")
            for tau, v in self.window_dissipation:
                lines.append(f"    tau = {tau:.6g}: {v:.6e}")
        return "\n".join(lines) + "\n"


ASYMPTOTIC_COLUMNS = ("time", "dist_rho_Lgamma", "kinetic_sup", "dist_eta_L1", "dist_eta_L2")


def lp_norm(f: np.ndarray, grid: Grid, p: float) -> float:
    return float((np.sum(np.abs(f) ** p) * grid.cell_volume) ** (1.0 / p))


def asymptotics(snapshots: Sequence[SimState], ledger: EnergyLedger, rho_s: np.ndarray, eta_s: np.ndarray,
                grid: Grid, params: PhysParams, rel_tol: float = 1e-3, kinetic_tol: float = 1e-6,
                mass_tol: float = 1e-8) -> AsymptoticsReport:
    """Distances of sampled states to (rho_s, 0, eta_s).

    Distances are judged relative to the norm of the stationary field and the
    kinetic term in absolute terms.  A metric counts as converged when its
    last sample is under threshold and the median of successive differences
    is not positive, or when every sample is under threshold (a run that
    starts at the floor only shows roundoff drift).
    """
    if len(snapshots) < 2:
        raise UsageError("need at least two samples")
    m0r, m0e = grid.integrate(snapshots[0].rho), grid.integrate(snapshots[0].eta)
    ms_r, ms_e = grid.integrate(rho_s), grid.integrate(eta_s)
    if abs(m0r - ms_r) > mass_tol * max(ms_r, 1e-300) or abs(m0e - ms_e) > mass_tol * max(ms_e, 1e-300):
        raise UsageError("stationary target masses do not match the trajectory")
    g = params.gamma
    times = np.array([s.time for s in snapshots])
    led_t = ledger.column("time")
    led_k = 2.0 * ledger.column("E_kinetic")  # int rho |u|^2
    ksup = np.array([float(np.max(led_k[led_t >= t - 1e-12])) for t in times])
    met = {
        "dist_rho_Lgamma": np.array([lp_norm(s.rho - rho_s, grid, g) for s in snapshots]),
        "kinetic_sup": ksup,
        "dist_eta_L1": np.array([lp_norm(s.eta - eta_s, grid, 1.0) for s in snapshots]),
        "dist_eta_L2": np.array([lp_norm(s.eta - eta_s, grid, 2.0) for s in snapshots]),
    }
    scale = {
        "dist_rho_Lgamma": lp_norm(rho_s, grid, g),
        "kinetic_sup": 1.0,
        "dist_eta_L1": lp_norm(eta_s, grid, 1.0),
        "dist_eta_L2": lp_norm(eta_s, grid, 2.0),
    }
    thr = {k: (kinetic_tol if k == "kinetic_sup" else rel_tol) for k in met}
    rel = {k: v / max(scale[k], 1e-300) for k, v in met.items()}
    trend = {k: float(np.median(np.diff(v))) for k, v in met.items()}
    conv = {k: bool(rel[k][-1] < thr[k] and (trend[k] <= 0 or np.all(rel[k] < thr[k]))) for k in met}

    diss = ledger.column("dissipation")
    hs = ledger.column("h")
    t_end = led_t[-1]
    windows = []
    for tau in times:
        if tau - 1.0 >= -1e-12 and tau + 2.0 <= t_end + 1e-12:
            sel = (led_t > tau - 1.0 + 1e-12) & (led_t <= tau + 2.0 + 1e-12)
            windows.append((float(tau), float(np.sum(hs[sel] * diss[sel]))))
    return AsymptoticsReport(times, met, rel, thr, conv, trend, windows)
