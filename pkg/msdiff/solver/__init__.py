"""Finite-volume solver for Maxwell-Stefan reaction-diffusion on box grids."""

from msdiff.solver.grid import Field, Grid
from msdiff.solver.initial import (
    PROFILES,
    CosineMode,
    GaussianBump,
    InitialCondition,
    Step,
    TwoBlob,
    Uniform,
    ZeroMask,
)
from msdiff.solver.scheme import (
    SourceHook,
    dissipation_rates,
    face_flux,
    semidiscrete_rhs,
    stable_dt,
    step_rk4,
)
from msdiff.solver.simulation import Diagnostics, SimConfig, SimulationResult, simulate

__all__ = [
    "PROFILES",
    "CosineMode",
    "Diagnostics",
    "Field",
    "GaussianBump",
    "Grid",
    "InitialCondition",
    "SimConfig",
    "SimulationResult",
    "SourceHook",
    "Step",
    "TwoBlob",
    "Uniform",
    "ZeroMask",
    "dissipation_rates",
    "face_flux",
    "semidiscrete_rhs",
    "simulate",
    "stable_dt",
    "step_rk4",
]
