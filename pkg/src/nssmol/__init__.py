"""Implicit finite-volume solver for a compressible barotropic fluid coupled to
a Smoluchowski particle density, with steady-state and diagnostic tools."""

from ._kernels import BACKEND
from .model import EnergyLedger, Grid, PhysParams, PotentialField, SimState, ValidationError
from .stepper import StepConfig, StepReport, implicit_step, run

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EnergyLedger",
    "Grid",
    "PhysParams",
    "PotentialField",
    "SimState",
    "StepConfig",
    "StepReport",
    "ValidationError",
    "implicit_step",
    "run",
]
