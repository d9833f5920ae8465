"""Implicit Euler time stepping by Picard iteration of a linearized map."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import functionals, operators, spatial
from .model import EnergyLedger, LedgerRow, PhysParams, PotentialField, SimState, check_state
from .operators import LinearSolveError
from .spatial import Scheme


@dataclass(frozen=True)
class StepConfig:
    h: float
    picard_tol: float = 1e-12
    picard_max: int = 60
    linear_tol: float = 1e-8
    energy_slack: float = 1e-10  # relative to |E(0)|
    delta_schedule: Tuple[float, ...] = ()
    transport: str = "entropy"
    mass_stab: float = 0.5
    max_halvings: int = 10
    mollify: bool = False

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError("h must be positive")
        if not self.picard_tol > 0 or self.picard_max < 1:
            raise ValueError("bad Picard settings")
        ds = tuple(float(d) for d in self.delta_schedule)
        if any(d < 0 for d in ds) or any(b >= a for a, b in zip(ds, ds[1:])):
            raise ValueError("delta_schedule must be nonnegative and strictly decreasing")
        object.__setattr__(self, "delta_schedule", ds)
        Scheme(self.transport, self.mass_stab)

    @property
    def scheme(self) -> Scheme:
        return Scheme(self.transport, self.mass_stab)


@dataclass
class StepReport:
    accepted: bool
    picard_iters: int
    residuals: Dict[str, float]
    energy_before: float
    energy_after: float
    dissipation: float
    inequality_ok: bool
    h: float
    reason: str = ""


class StepAbort(RuntimeError):
    """Raised by ``run`` after the halving budget is exhausted."""

    def __init__(self, msg, state, ledger, step_index, report):
        super().__init__(msg)
        self.state = state
        self.ledger = ledger
        self.step_index = step_index
        self.report = report


# ---------------------------------------------------------------------------


def mollify(state: SimState, grid) -> SimState:
    """Width-3 box filter with reflecting ends; preserves the integrals."""

    def box(f):
        for ax in range(f.ndim):
            pw = [(0, 0)] * f.ndim
            pw[ax] = (1, 1)
            g = np.pad(f, pw, mode="edge")
            n = f.shape[ax]
            f = (
                np.take(g, range(0, n), axis=ax)
                + np.take(g, range(1, n + 1), axis=ax)
                + np.take(g, range(2, n + 2), axis=ax)
            ) / 3.0
        return f

    mom = np.stack([box(state.momentum[c]) for c in range(grid.dim)])
    return SimState(box(state.rho), mom, box(state.eta), state.time)


def fixed_point_map(guess: SimState, prev: SimState, pot: PotentialField, params: PhysParams, cfg: StepConfig) -> SimState:
    """One sweep of the linearized implicit map.

    (a) eta solve with velocity frozen at the guess; (b) rho then u, with the
    particle density frozen at the guess in the pressure and body force.
    """
    grid = pot.grid
    h = cfg.h
    scheme = cfg.scheme
    z = guess.velocity(grid)
    # upwind donor cells follow the previous level so the map stays continuous in the guess
    side = prev.velocity(grid)
    ones = np.ones(grid.shape)

    ec = spatial.particle_coefs(guess.eta, z, pot, scheme, side)
    eta = operators.solve_scalar(grid, ones, ec, h, prev.eta, cfg.linear_tol, "particles")

    rc = spatial.mass_coefs(guess.rho, z, pot, params, scheme, side)
    rho = operators.solve_scalar(grid, ones, rc, h, prev.rho, cfg.linear_tol, "mass")

    fm = spatial.apply_coefs(rc, rho)
    mc = spatial.momentum_coefs(fm)
    force = spatial.pressure_force(rho, guess.eta, z, pot, params, scheme, side)
    rhs = prev.momentum - h * force
    u = operators.solve_momentum(grid, rho, mc, h, params.mu, params.lam, rhs, cfg.linear_tol)
    m = rho[None] * u
    out = SimState(rho, m, eta, prev.time + h)
    m[:, rho <= out.vacuum_floor(grid)] = 0.0
    return out


def _rel_change(a: SimState, b: SimState) -> Dict[str, float]:
    num = {"rho": float(np.sum((a.rho - b.rho) ** 2)),
           "momentum": float(np.sum((a.momentum - b.momentum) ** 2)),
           "eta": float(np.sum((a.eta - b.eta) ** 2))}
    den = float(np.sum(a.rho**2) + np.sum(a.momentum**2) + np.sum(a.eta**2))
    den = max(den, 1e-300)
    out = {k: math.sqrt(v / den) for k, v in num.items()}
    out["total"] = math.sqrt(sum(num.values()) / den)
    return out


def discrete_residuals(state: SimState, prev: SimState, pot, params, cfg: StepConfig) -> Dict[str, float]:
    """Relative residuals of the nonlinear implicit equations at ``state``."""
    grid = pot.grid
    h = state.time - prev.time
    scheme = cfg.scheme
    u = state.velocity(grid)
    side = prev.velocity(grid)
    fm = spatial.apply_coefs(spatial.mass_coefs(state.rho, u, pot, params, scheme, side), state.rho)
    r_rho = state.rho - prev.rho + h * operators.div_faces(fm, grid)
    fe = spatial.apply_coefs(spatial.particle_coefs(state.eta, u, pot, scheme, side), state.eta)
    r_eta = state.eta - prev.eta + h * operators.div_faces(fe, grid)
    fu = spatial.momentum_fluxes(fm, u)
    conv = np.stack([operators.div_faces([f[c] for f in fu], grid) for c in range(grid.dim)])
    visc = spatial.viscous_operator(u, grid, params)
    force = spatial.pressure_force(state.rho, state.eta, u, pot, params, scheme, side)
    r_m = state.rho[None] * u - prev.momentum + h * (conv - visc + force)
    # scale the momentum residual by the size of its individual terms
    pf = np.stack([operators.cell_from_faces(np.abs(np.diff(functionals.pressure(state.rho, params), axis=ax)), ax, dx)
                   for ax, dx in enumerate(grid.spacing)])
    m_scale = (np.linalg.norm(state.momentum) + np.linalg.norm(prev.momentum)
               + h * (np.linalg.norm(pf) + np.linalg.norm(visc) + np.linalg.norm(conv)))
    return {
        "rho": float(np.linalg.norm(r_rho) / max(np.linalg.norm(state.rho), 1e-300)),
        "momentum": float(np.linalg.norm(r_m) / max(m_scale, 1e-300)),
        "eta": float(np.linalg.norm(r_eta) / max(np.linalg.norm(state.eta), 1e-300)),
    }


def ledger_row(state: SimState, pot, params, h: float, e_prev: Optional[float]) -> LedgerRow:
    parts = functionals.total_energy(state, pot, params)
    dv, de = functionals.dissipation(state, pot, params)
    m_rho, m_eta = functionals.masses(state, pot.grid)
    margin = 0.0 if e_prev is None else e_prev - parts.total - h * (dv + de)
    return LedgerRow(
        time=state.time, mass_rho=m_rho, mass_eta=m_eta, E_total=parts.total,
        E_kinetic=parts.kinetic, E_pressure=parts.pressure, E_entropy=parts.entropy,
        E_potential=parts.potential, dissipation_visc=dv, dissipation_eta=de,
        ineq_residual=margin, h=h,
    )


def implicit_step(prev: SimState, pot: PotentialField, params: PhysParams, cfg: StepConfig,
                  slack: Optional[float] = None) -> Tuple[SimState, StepReport]:
    """Advance one step of size cfg.h. The returned state is only valid if accepted."""
    e_prev = functionals.total_energy(prev, pot, params).total
    if slack is None:
        slack = cfg.energy_slack * abs(e_prev)
    guess = prev
    res = {"rho": math.inf, "momentum": math.inf, "eta": math.inf, "total": math.inf}
    it = 0
    reason = ""
    try:
        for it in range(1, cfg.picard_max + 1):
            new = fixed_point_map(guess, prev, pot, params, cfg)
            res = _rel_change(new, guess)
            guess = new
            if res["total"] <= cfg.picard_tol:
                break
        else:
            reason = f"Picard not converged in {cfg.picard_max} sweeps (change {res['total']:.3e})"
    except LinearSolveError as exc:
        reason = str(exc)
        res = dict(res, linear=exc.residual)
    state = guess
    e_new, diss = math.nan, math.nan
    ineq_ok = False
    if not reason:
        if np.any(state.rho < 0) or np.any(state.eta < 0):
            reason = "negative density"
        elif not (np.all(np.isfinite(state.rho)) and np.all(np.isfinite(state.eta))):
            reason = "non-finite state"
    if not reason:
        e_new = functionals.total_energy(state, pot, params).total
        dv, de = functionals.dissipation(state, pot, params)
        diss = dv + de
        ineq_ok = e_new + cfg.h * diss <= e_prev + slack
        if not ineq_ok:
            reason = f"energy inequality violated by {e_new + cfg.h * diss - e_prev:.3e}"
    rep = StepReport(
        accepted=not reason, picard_iters=it, residuals=res, energy_before=e_prev,
        energy_after=e_new, dissipation=diss, inequality_ok=ineq_ok, h=cfg.h, reason=reason,
    )
    return state, rep


def run(init: SimState, pot: PotentialField, params: PhysParams, cfg: StepConfig, t_end: float,
        on_step: Optional[Callable[[SimState, LedgerRow], None]] = None) -> Tuple[SimState, EnergyLedger]:
    """Integrate to t_end, halving h on rejection and growing it back afterwards.

    ``on_step`` is called with (state, ledger row) for the initial state and
    every accepted step.  Raises StepAbort once ``cfg.max_halvings`` halvings
    of one step fail; the exception carries the partial ledger.
    """
    grid = pot.grid
    check_state(init, grid)
    if t_end < init.time:
        raise ValueError("t_end precedes the initial time")
    state = mollify(init, grid) if cfg.mollify else init.copy()
    ledger = EnergyLedger()
    row0 = ledger_row(state, pot, params, 0.0, None)
    ledger.append(row0)
    if on_step is not None:
        on_step(state, row0)
    slack = cfg.energy_slack * abs(row0.E_total)
    h_cur = cfg.h
    step = 0
    tiny = 1e-12 * max(abs(t_end), 1.0)
    while t_end - state.time > tiny:
        halvings = 0
        while True:
            h_try = min(h_cur, t_end - state.time)
            if t_end - state.time - h_try < 1e-9 * h_try:
                h_try = t_end - state.time
            new, rep = implicit_step(state, pot, params, replace(cfg, h=h_try), slack=slack)
            if rep.accepted:
                break
            halvings += 1
            if halvings > cfg.max_halvings:
                raise StepAbort(
                    f"step {step + 1} at t={state.time:.6g} rejected after {cfg.max_halvings} halvings: {rep.reason}",
                    state, ledger, step + 1, rep,
                )
            h_cur = h_try / 2.0
        if halvings == 0 and h_cur < cfg.h:
            h_cur = min(cfg.h, 2.0 * h_cur)
        if abs(new.time - t_end) <= tiny:
            new.time = float(t_end)
        step += 1
        row = ledger_row(new, pot, params, h_try, ledger.rows[-1].E_total)
        ledger.append(row)
        state = new
        if on_step is not None:
            on_step(state, row)
    return state, ledger


@dataclass
class DeltaRun:
    delta: float
    state: SimState
    ledger: EnergyLedger
    rho_power_integral: float  # int_0^T int rho^(gamma+Theta)
    aborted: bool = False
    message: str = ""


def delta_continuation(init: SimState, pot: PotentialField, params: PhysParams, cfg: StepConfig,
                       t_end: float) -> List[DeltaRun]:
    """Run the same problem for each delta in the schedule.

    Records the space-time integral of rho^(gamma+Theta) per run, which stays
    bounded uniformly in delta.
    """
    sched = cfg.delta_schedule or (params.delta,)
    q = params.gamma + params.theta
    V = pot.grid.cell_volume
    out = []
    for d in sched:
        acc = [0.0]

        def on_step(s, row, acc=acc):
            acc[0] += row.h * float(np.sum(s.rho**q)) * V

        p_d = params.with_delta(d)
        try:
            st, led = run(init, pot, p_d, cfg, t_end, on_step=on_step)
            out.append(DeltaRun(d, st, led, acc[0]))
        except StepAbort as exc:
            out.append(DeltaRun(d, exc.state, exc.ledger, acc[0], True, str(exc)))
    return out
