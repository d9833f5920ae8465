"""Run configuration: a flat ``key = value`` format with ``[section]`` headers.

Lines starting with ``#`` are comments.  Unknown sections or keys, keys that
do not apply to the selected potential or initial-data kind, and duplicate
keys are errors reported with line numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .model import Grid, PhysParams, ValidationError
from .stepper import StepConfig


class ConfigError(ValidationError):
    pass


def _floats(s: str) -> Tuple[float, ...]:
    return tuple(float(x) for x in s.replace(",", " ").split())


def _ints(s: str) -> Tuple[int, ...]:
    return tuple(int(x) for x in s.replace(",", " ").split())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# section -> key -> (parser, default). default None means required/conditional.
SCHEMA: Dict[str, Dict[str, Tuple[Any, Any]]] = {
    "grid": {
        "dim": (int, 1),
        "lo": (_floats, None),
        "hi": (_floats, None),
        "cells": (_ints, None),
        "boundary": (str, "bounded"),
    },
    "physics": {
        "a": (float, 1.0),
        "gamma": (float, 2.0),
        "mu": (float, 1.0),
        "lambda": (float, 0.0),
        "beta": (float, 1.0),
        "delta": (float, 0.0),
    },
    "potential": {
        "kind": (str, None),
        "g": (float, None),
        "k": (float, None),
        "center": (_floats, None),
        "scale": (float, None),
        "file": (str, None),
    },
    "initial": {
        "kind": (str, None),
        "rho0": (float, None),
        "eta0": (float, None),
        "mass_rho": (float, None),
        "mass_eta": (float, None),
        "amplitude": (float, None),
        "seed": (int, None),
        "file": (str, None),
    },
    "time": {
        "h": (float, None),
        "t_end": (float, None),
        "sample_every": (int, 100),
        "picard_tol": (float, 1e-12),
        "picard_max": (int, 60),
        "linear_tol": (float, 1e-8),
        "energy_slack": (float, 1e-10),
        "transport": (str, "entropy"),
        "mass_stab": (float, 0.5),
        "max_halvings": (int, 10),
        "mollify": (_bool, False),
        "delta_schedule": (_floats, ()),
    },
    "asymptotics": {
        "rel_tol": (float, 1e-3),
        "kinetic_tol": (float, 1e-6),
    },
}

POTENTIAL_KEYS = {
    "linear": {"g"},
    "quadratic": {"k", "center"},
    "double_well": {"scale"},
    "tabulated": {"file"},
    "zero": set(),
}
POTENTIAL_REQUIRED = {"linear": {"g"}, "quadratic": {"k"}, "double_well": {"scale"}, "tabulated": {"file"}, "zero": set()}
INITIAL_KEYS = {
    "uniform": {"rho0", "eta0"},
    "equilibrium": {"mass_rho", "mass_eta"},
    "perturbed_equilibrium": {"mass_rho", "mass_eta", "amplitude", "seed"},
    "tabulated": {"file"},
}


@dataclass
class RunConfig:
    grid: Grid
    physics: PhysParams
    potential: Dict[str, Any]
    initial: Dict[str, Any]
    step: StepConfig
    t_end: float
    sample_every: int = 100
    rel_tol: float = 1e-3
    kinetic_tol: float = 1e-6
    source: str = "<string>"
    base_dir: Optional[Path] = None

    @property
    def randomized(self) -> bool:
        return self.initial["kind"] == "perturbed_equilibrium"

    def with_seed(self, seed: int) -> "RunConfig":
        if not self.randomized:
            return self
        init = dict(self.initial, seed=int(seed))
        return RunConfig(self.grid, self.physics, self.potential, init, self.step, self.t_end,
                         self.sample_every, self.rel_tol, self.kinetic_tol, self.source, self.base_dir)

    def echo(self) -> str:
        """Canonical text of every effective setting; parses back to an equal config."""
        g, p, s = self.grid, self.physics, self.step

        def fl(v):
            return ", ".join(repr(float(x)) for x in v)

        lines = ["# effective configuration", "[grid]", f"dim = {g.dim}", f"lo = {fl(g.lo)}",
                 f"hi = {fl(g.hi)}", "cells = " + ", ".join(str(n) for n in g.cells),
                 f"boundary = {g.boundary}", "", "[physics]"]
        lines += [f"a = {p.a!r}", f"gamma = {p.gamma!r}", f"mu = {p.mu!r}", f"lambda = {p.lam!r}",
                  f"beta = {p.beta!r}", f"delta = {p.delta!r}", "", "[potential]"]
        for section in (self.potential, self.initial):
            for k, v in section.items():
                if isinstance(v, tuple):
                    v = fl(v)
                elif isinstance(v, float):
                    v = repr(v)
                lines.append(f"{k} = {v}")
            lines += ["", "[initial]"] if section is self.potential else [""]
        lines += ["[time]", f"h = {s.h!r}", f"t_end = {self.t_end!r}", f"sample_every = {self.sample_every}",
                  f"picard_tol = {s.picard_tol!r}", f"picard_max = {s.picard_max}",
                  f"linear_tol = {s.linear_tol!r}", f"energy_slack = {s.energy_slack!r}",
                  f"transport = {s.transport}", f"mass_stab = {s.mass_stab!r}",
                  f"max_halvings = {s.max_halvings}", f"mollify = {str(s.mollify).lower()}",
                  f"delta_schedule = {fl(s.delta_schedule)}", "", "[asymptotics]",
                  f"rel_tol = {self.rel_tol!r}", f"kinetic_tol = {self.kinetic_tol!r}"]
        return "\n".join(lines) + "\n"

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return self.echo() == other.echo()


def _tokenize(text: str, source: str):
    """Yield (section, key, raw value, line number)."""
    section = None
    seen: Dict[Tuple[str, str], int] = {}
    sections_seen: Dict[str, int] = {}
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            line = line.split("#", 1)[0].rstrip()
            if not line.endswith("]"):
                raise ConfigError(f"{source}:{no}: malformed section header {raw!r}")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"{source}:{no}: unknown section [{section}]")
            if section in sections_seen:
                raise ConfigError(f"{source}:{no}: section [{section}] repeated (first at line {sections_seen[section]})")
            sections_seen[section] = no
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {raw!r}")
        if section is None:
            raise ConfigError(f"{source}:{no}: key outside any [section]")
        key, val = (t.strip() for t in line.split("=", 1))
        if "#" in val:
            val = val.split("#", 1)[0].strip()
        if key not in SCHEMA[section]:
            raise ConfigError(f"{source}:{no}: unknown key {key!r} in [{section}]")
        if (section, key) in seen:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r} in [{section}] (first defined at line {seen[(section, key)]})")
        seen[(section, key)] = no
        out.append((section, key, val, no))
    return out


def parse_config(text: str, source: str = "<string>", base_dir: Optional[Path] = None) -> RunConfig:
    vals: Dict[str, Dict[str, Any]] = {s: {} for s in SCHEMA}
    lines: Dict[Tuple[str, str], int] = {}
    for section, key, raw, no in _tokenize(text, source):
        parser = SCHEMA[section][key][0]
        try:
            v = parser(raw)
        except ValueError:
            raise ConfigError(f"{source}:{no}: cannot parse {key} = {raw!r}") from None
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"{source}:{no}: {key} must be finite")
        vals[section][key] = v
        lines[(section, key)] = no

    def where(section, key):
        no = lines.get((section, key))
        return f"{source}:{no}" if no else f"{source}: [{section}]"

    def get(section, key):
        if key in vals[section]:
            return vals[section][key]
        default = SCHEMA[section][key][1]
        if default is None:
            raise ConfigError(f"{source}: missing required key {key!r} in [{section}]")
        return default

    def kinded(section, allowed, required=None):
        if "kind" not in vals[section]:
            raise ConfigError(f"{source}: missing required key 'kind' in [{section}]")
        kind = vals[section]["kind"]
        if kind not in allowed:
            raise ConfigError(f"{where(section, 'kind')}: unknown {section} kind {kind!r}")
        spec = {"kind": kind}
        for k, v in vals[section].items():
            if k == "kind":
                continue
            if k not in allowed[kind]:
                raise ConfigError(f"{where(section, k)}: key {k!r} does not apply to {section} kind {kind!r}")
            spec[k] = v
        need = (required or allowed)[kind]
        for k in sorted(need):
            if k not in spec:
                raise ConfigError(f"{source}: {section} kind {kind!r} needs key {k!r}")
        return spec

    try:
        dim = get("grid", "dim")
        grid = Grid(dim, get("grid", "lo"), get("grid", "hi"), get("grid", "cells"), get("grid", "boundary"))
    except ValidationError as exc:
        raise ConfigError(f"{source}: [grid] {exc}") from None
    try:
        phys = PhysParams(get("physics", "a"), get("physics", "gamma"), get("physics", "mu"),
                          get("physics", "lambda"), get("physics", "beta"), get("physics", "delta"))
    except ValidationError as exc:
        raise ConfigError(f"{source}: [physics] {exc}") from None
    potential = kinded("potential", POTENTIAL_KEYS, POTENTIAL_REQUIRED)
    initial = kinded("initial", INITIAL_KEYS)
    init_kind = initial["kind"]
    if init_kind in ("equilibrium", "perturbed_equilibrium"):
        for k in ("mass_rho", "mass_eta"):
            if not initial[k] > 0:
                raise ConfigError(f"{where('initial', k)}: {k} must be > 0")
    if init_kind == "uniform":
        for k in ("rho0", "eta0"):
            if not initial[k] >= 0:
                raise ConfigError(f"{where('initial', k)}: {k} must be >= 0")
    if init_kind == "perturbed_equilibrium" and not 0 <= initial["amplitude"] < 1:
        raise ConfigError(f"{where('initial', 'amplitude')}: amplitude must lie in [0, 1)")

    t_end = get("time", "t_end")
    if not t_end > 0:
        raise ConfigError(f"{where('time', 't_end')}: t_end must be > 0")
    sample_every = get("time", "sample_every")
    if sample_every < 1:
        raise ConfigError(f"{where('time', 'sample_every')}: sample_every must be >= 1")
    try:
        step = StepConfig(
            h=get("time", "h"), picard_tol=get("time", "picard_tol"), picard_max=get("time", "picard_max"),
            linear_tol=get("time", "linear_tol"), energy_slack=get("time", "energy_slack"),
            delta_schedule=get("time", "delta_schedule"), transport=get("time", "transport"),
            mass_stab=get("time", "mass_stab"), max_halvings=get("time", "max_halvings"),
            mollify=get("time", "mollify"),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: [time] {exc}") from None
    rel_tol = get("asymptotics", "rel_tol")
    kin_tol = get("asymptotics", "kinetic_tol")
    for name, v in (("rel_tol", rel_tol), ("kinetic_tol", kin_tol)):
        if not v > 0:
            raise ConfigError(f"{where('asymptotics', name)}: {name} must be > 0 (the discretization floor is positive)")
    return RunConfig(grid, phys, potential, initial, step, t_end, sample_every, rel_tol, kin_tol, source, base_dir)


PRESETS = ("column_1d", "halfline_1d", "double_well_1d")


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("nssmol").joinpath("presets", f"{name}.cfg").read_text()


def load_preset(name: str) -> RunConfig:
    return parse_config(preset_text(name), source=f"preset:{name}")


def load_config(path_or_preset: str) -> RunConfig:
    p = Path(path_or_preset)
    if p.is_file():
        return parse_config(p.read_text(), source=str(p), base_dir=p.parent)
    if path_or_preset in PRESETS:
        return load_preset(path_or_preset)
    raise ConfigError(f"config file not found: {path_or_preset}")
