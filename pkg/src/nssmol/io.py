"""Deterministic CSV and text output."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import LEDGER_COLUMNS, EnergyLedger, Grid, SimState

FMT = "%.17g"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FMT % float(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_columns(path: Path, header: Sequence[str], cols: Sequence[np.ndarray]) -> None:
    cols = [np.asarray(c, float).ravel() for c in cols]
    write_csv(path, header, zip(*cols))


def center_columns(grid: Grid):
    names = ["x", "y"][: grid.dim]
    return names, [m.ravel() for m in grid.mesh()]


def write_fields(path: Path, state: SimState, grid: Grid) -> None:
    """Columns x[, y], rho, u[_x, u_y], eta; C order over cells.

    The layout matches the tabulated initial-data format."""
    names, cols = center_columns(grid)
    u = state.velocity(grid)
    unames = ["u"] if grid.dim == 1 else ["u_x", "u_y"]
    write_columns(path, names + ["rho"] + unames + ["eta"], cols + [state.rho] + list(u) + [state.eta])


def write_ledger(path: Path, ledger: EnergyLedger) -> None:
    write_csv(path, LEDGER_COLUMNS, (r.values() for r in ledger.rows))


def read_csv(path: Path):
    """Header and float array; a small inverse of write_csv for tests and tools.

    Boolean cells read as 1.0 and 0.0."""
    bools = {"true": 1.0, "false": 0.0}
    lines = Path(path).read_text().splitlines()
    head = lines[0].split(",")
    data = np.array([[bools.get(v, None) if v in bools else float(v) for v in ln.split(",")]
                     for ln in lines[1:]]).reshape(-1, len(head))
    return head, data
