"""Command line entry points.

Exit codes: 0 success, 1 configuration or validation error, 2 step
controller abort, 3 root-finder failure, 4 confinement failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io
from .config import PRESETS, ConfigError, RunConfig, load_config
from .diagnostics import (
    ASYMPTOTIC_COLUMNS,
    UsageError,
    asymptotics,
    energy_inequality_audit,
    entropy_bounds_check,
)
from .model import ValidationError
from .problems import build_initial, build_potential, initial_masses
from .stationary import RootFindError, solve_stationary, validate_confinement
from .stepper import StepAbort, delta_continuation, run

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_ROOT, EXIT_CONFINE = 0, 1, 2, 3, 4
MIN_SAMPLES = 8


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are configuration errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _log(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = cfg.with_seed(args.seed)
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    if not out.parent.is_dir():
        raise ConfigError(f"output directory parent does not exist: {out.parent}")
    out.mkdir(exist_ok=True)
    return out


def _require_buoyancy(cfg: RunConfig) -> None:
    if cfg.grid.boundary == "truncated-unbounded" and cfg.physics.beta <= 0:
        raise ConfigError("beta must be positive on a truncated unbounded domain")


def _setup(cfg: RunConfig):
    pot = build_potential(cfg.potential, cfg.grid, cfg.base_dir)
    init = build_initial(cfg.initial, cfg.grid, pot, cfg.physics, cfg.base_dir)
    return pot, init


class _Recorder:
    """Collects sampled snapshots, writes them as they arrive and tracks minima."""

    def __init__(self, cfg: RunConfig, pot, out: Path, args):
        self.cfg, self.pot, self.out, self.args = cfg, pot, out, args
        self.step = -1
        self.snapshots = []
        self.min_rho = math.inf
        self.min_eta = math.inf
        self.entropy_worst = math.inf

    def __call__(self, state, row):
        self.step += 1
        self.min_rho = min(self.min_rho, float(state.rho.min()))
        self.min_eta = min(self.min_eta, float(state.eta.min()))
        if self.step % self.cfg.sample_every == 0:
            self.sample(state)

    def sample(self, state):
        if self.snapshots and self.snapshots[-1][0] == self.step:
            return
        snap = state.copy()
        self.snapshots.append((self.step, snap))
        chk = entropy_bounds_check(snap.eta, self.pot)
        self.entropy_worst = min(self.entropy_worst, chk.margin_neg, chk.margin_free)
        io.write_fields(self.out / f"fields_{self.step:06d}.csv", snap, self.cfg.grid)
        _log(self.args, f"  t = {snap.time:.6g}  step {self.step}")

    def summary(self) -> List[str]:
        return [
            f"  snapshots              {len(self.snapshots)}",
            f"  min rho over steps     {self.min_rho:.17g}",
            f"  min eta over steps     {self.min_eta:.17g}",
            f"  positivity             {'ok' if self.min_rho >= 0 and self.min_eta >= 0 else 'violated'}",
            f"  entropy bounds margin  {self.entropy_worst:.17g} (tolerance -1e-10)",
        ]


def _simulate(cfg: RunConfig, out: Path, args):
    """Run, write ledger/fields/echo/audit. Returns (state, ledger, recorder, abort or None)."""
    _require_buoyancy(cfg)
    pot, init = _setup(cfg)
    (out / "config_echo.txt").write_text(cfg.echo())
    rec = _Recorder(cfg, pot, out, args)
    abort = None
    try:
        state, ledger = run(init, pot, cfg.physics, cfg.step, cfg.t_end, on_step=rec)
        rec.sample(state)
    except StepAbort as exc:
        abort = exc
        state, ledger = exc.state, exc.ledger
    io.write_ledger(out / "ledger.csv", ledger)
    slack = cfg.step.energy_slack * abs(ledger.rows[0].E_total)
    audit = energy_inequality_audit(ledger, slack)
    text = audit.to_text() + "\n".join(rec.summary()) + "\n"
    if abort is not None:
        text += f"ABORTED at step {abort.step_index}: {abort}\n"
    (out / "audit.txt").write_text(text)
    return state, ledger, rec, pot, abort


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    _log(args, f"simulate {cfg.source} -> {out}")
    state, ledger, rec, _, abort = _simulate(cfg, out, args)
    if abort is not None:
        print(f"error: {abort}", file=sys.stderr)
        return EXIT_ABORT
    _log(args, (out / "audit.txt").read_text().rstrip())
    return EXIT_OK


def cmd_stationary(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    pot, init = _setup(cfg)
    m_rho, m_eta = initial_masses(cfg.initial, cfg.grid, init)
    res = solve_stationary(pot, cfg.physics, m_rho, m_eta)
    names, cols = io.center_columns(cfg.grid)
    io.write_columns(out / "stationary.csv", names + ["rho_s", "eta_s"], cols + [res.rho_s, res.eta_s])
    (out / "stationary_report.txt").write_text(res.report_text())
    _log(args, res.report_text().rstrip())
    return EXIT_OK


def cmd_validate_potential(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    pot = build_potential(cfg.potential, cfg.grid, cfg.base_dir)
    rep = validate_confinement(pot, cfg.physics)
    (out / "confinement_report.txt").write_text(rep.to_text())
    _log(args, rep.to_text().rstrip())
    return EXIT_OK if rep.passed else EXIT_CONFINE


def cmd_asymptotics(args) -> int:
    cfg = _load(args)
    n_samples = int(cfg.t_end / cfg.step.h + 1e-9) // cfg.sample_every + 1
    if n_samples < MIN_SAMPLES:
        raise ConfigError(
            f"t_end/h/sample_every give {n_samples} samples; at least {MIN_SAMPLES} are needed")
    out = _outdir(args)
    _log(args, f"asymptotics {cfg.source} -> {out}")
    state, ledger, rec, pot, abort = _simulate(cfg, out, args)
    if abort is not None:
        print(f"error: {abort}", file=sys.stderr)
        return EXIT_ABORT
    snaps = [s for _, s in rec.snapshots]
    m_rho, m_eta = cfg.grid.integrate(snaps[0].rho), cfg.grid.integrate(snaps[0].eta)
    st = solve_stationary(pot, cfg.physics, m_rho, m_eta)
    try:
        rep = asymptotics(snaps, ledger, st.rho_s, st.eta_s, cfg.grid, cfg.physics, cfg.rel_tol, cfg.kinetic_tol)
    except UsageError as exc:
        raise ConfigError(str(exc)) from None
    cols = [rep.times] + [rep.metrics[k] for k in ASYMPTOTIC_COLUMNS[1:]]
    io.write_columns(out / "asymptotics.csv", ASYMPTOTIC_COLUMNS, cols)
    (out / "asymptotics_report.txt").write_text(rep.to_text())
    _log(args, rep.to_text().rstrip())
    return EXIT_OK if rep.all_converged else EXIT_CONFIG


def cmd_sweep_delta(args) -> int:
    cfg = _load(args)
    _require_buoyancy(cfg)
    out = _outdir(args)
    pot, init = _setup(cfg)
    (out / "config_echo.txt").write_text(cfg.echo())
    runs = delta_continuation(init, pot, cfg.physics, cfg.step, cfg.t_end)
    rows = []
    for r in runs:
        rows.append((r.delta, r.rho_power_integral, r.ledger.rows[-1].time, r.ledger.rows[-1].E_total, r.aborted))
        _log(args, f"  delta = {r.delta:.3g}: int int rho^(gamma+Theta) = {r.rho_power_integral:.10g}"
                   + (f" (aborted: {r.message})" if r.aborted else ""))
    io.write_csv(out / "sweep_delta.csv", ("delta", "rho_power_integral", "t_final", "E_final", "aborted"), rows)
    vals = np.array([r.rho_power_integral for r in runs])
    spread = float(vals.max() / vals.min()) if vals.min() > 0 else math.inf
    (out / "sweep_delta_report.txt").write_text(
        "Artificial-pressure sweep\n"
        f"  exponent gamma+Theta  {cfg.physics.gamma + cfg.physics.theta:.17g}\n"
        f"  max/min ratio         {spread:.17g}\n"
        f"  bounded within 2      {'yes' if spread <= 2.0 else 'no'}\n")
    _log(args, f"  max/min ratio {spread:.6g}")
    return EXIT_ABORT if any(r.aborted for r in runs) else EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "time-integrate a configuration and write ledger, fields and audit"),
    "stationary": (cmd_stationary, "compute the stationary state for the configured masses"),
    "validate-potential": (cmd_validate_potential, "check the confinement conditions on the potential"),
    "asymptotics": (cmd_asymptotics, "simulate and measure convergence to the stationary state"),
    "sweep-delta": (cmd_sweep_delta, "rerun over the artificial-pressure schedule"),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nssmol", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, helptext) in COMMANDS.items():
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True,
                       help=f"config file path or preset name ({', '.join(PRESETS)})")
        s.add_argument("--out", default="out", help="output directory (created if missing)")
        s.add_argument("--seed", type=int, default=None, help="override the perturbation seed")
        s.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    try:
        return fn(args)
    except (ConfigError, ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RootFindError as exc:
        print(f"root finder failed: {exc}", file=sys.stderr)
        return EXIT_ROOT


if __name__ == "__main__":
    sys.exit(main())
