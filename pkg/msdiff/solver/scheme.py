"""Finite-volume discretization and explicit time stepping.

Unknowns are cell averages of y. Interior faces carry the flux
A0(y_face) (y_right - y_left) / h with y_face the renormalized arithmetic
mean of the neighbors; boundary faces carry zero flux.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Callable

import numpy as np
from numpy.typing import NDArray

from msdiff.errors import (
    InadmissibleComposition,
    NegativeConcentration,
    NotInE,
    StepRejected,
)
from msdiff.kinetics import chemical_potential, source_term
from msdiff.mixture import (
    CompositionLike,
    MixtureSpec,
    Vector,
    as_vector,
    classify,
    flux_matrix_apply,
    flux_spectral_radius,
)
from msdiff.solver.grid import Field, Grid

if TYPE_CHECKING:
    from msdiff.solver.simulation import SimConfig

logger = logging.getLogger(__name__)

UNDERSHOOT_TOL = 1e-10
LEAK_TOL = 1e-12

# maps cell compositions (..., N) to a mass-preserving reaction term (..., N) in E
SourceHook = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def _face_states(left: NDArray[np.float64], right: NDArray[np.float64]) -> NDArray[np.float64]:
    mean = 0.5 * (left + right)
    return mean / mean.sum(axis=-1, keepdims=True)


def face_flux(
    spec: MixtureSpec, y_left: CompositionLike, y_right: CompositionLike, spacing: float
) -> Vector:
    left = np.asarray(as_vector(y_left, spec.n_species))
    right = np.asarray(as_vector(y_right, spec.n_species))
    classify(left)
    classify(right)
    return flux_matrix_apply(spec, _face_states(left, right), (right - left) / spacing)


def _axis_fluxes(
    spec: MixtureSpec, values: NDArray[np.float64], axis: int, spacing: float
) -> NDArray[np.float64]:
    """Fluxes through the interior faces normal to ``axis``."""
    n = values.shape[axis]
    left = values.take(np.arange(n - 1), axis=axis)
    right = values.take(np.arange(1, n), axis=axis)
    return flux_matrix_apply(spec, _face_states(left, right), (right - left) / spacing)


def _pad_boundary(flux: NDArray[np.float64], axis: int) -> NDArray[np.float64]:
    shape = list(flux.shape)
    shape[axis] = 1
    zeros = np.zeros(shape)
    return np.concatenate([zeros, flux, zeros], axis=axis)


def flux_divergence(
    spec: MixtureSpec, grid: Grid, values: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Div(A0 grad y) per cell: sum of signed face fluxes times area over volume."""
    total = np.zeros_like(values)
    for axis, (h, area) in enumerate(zip(grid.spacing, grid.face_areas)):
        padded = _pad_boundary(_axis_fluxes(spec, values, axis, h), axis)
        total += np.diff(padded, axis=axis) * (area / grid.cell_volume)
    return total


def mass_leak(values: NDArray[np.float64]) -> float:
    """Largest per-cell |(v | e)| relative to max(1, |v|_inf)."""
    if values.size == 0:
        return 0.0
    scale = max(1.0, float(np.abs(values).max()))
    return float(np.abs(values.sum(axis=-1)).max()) / scale


def reaction_values(
    config: SimConfig, values: NDArray[np.float64]
) -> NDArray[np.float64] | None:
    """The reaction term per cell from the network or the source hook, if any."""
    if config.source is not None:
        return np.asarray(config.source(values), dtype=float)
    if config.network is not None and config.network.m:
        return source_term(config.network, config.spec, values)
    return None


def _rhs_values(config: SimConfig, values: NDArray[np.float64]) -> NDArray[np.float64]:
    rhs = flux_divergence(config.spec, config.grid, values)
    reaction = reaction_values(config, values)
    if reaction is not None:
        rhs = rhs + reaction
    rhs /= config.spec.rho
    leak = mass_leak(rhs)
    if leak > LEAK_TOL * config.spec.n_species:
        raise NotInE(f"right-hand side leaves E (relative leak {leak:.3e})", leak=leak)
    # remove round-off leaving E
    return rhs - rhs.mean(axis=-1, keepdims=True)


def semidiscrete_rhs(config: SimConfig, field: Field) -> NDArray[np.float64]:
    return _rhs_values(config, field.values)


def stable_dt(config: SimConfig, field: Field) -> float:
    radius = float(flux_spectral_radius(config.spec, field.flat).max())
    grid = config.grid
    return config.cfl_safety * config.spec.rho * grid.h_min**2 / (2 * grid.dim * radius)


def _stage(config: SimConfig, values: NDArray[np.float64], time: float) -> NDArray[np.float64]:
    try:
        return _rhs_values(config, values)
    except (InadmissibleComposition, NegativeConcentration) as e:
        raise StepRejected(
            f"intermediate stage left the admissible set: {e.message}", time=time
        ) from e


def step_rk4(config: SimConfig, field: Field, dt: float) -> Field:
    y = field.values
    t = field.time
    k1 = _stage(config, y, t)
    k2 = _stage(config, y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = _stage(config, y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = _stage(config, y + dt * k3, t + dt)
    values = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(values)):
        raise StepRejected("step produced non-finite values", time=t + dt, dt=dt)
    lowest = float(values.min())
    if lowest < -UNDERSHOOT_TOL:
        raise StepRejected(
            f"component {lowest:.3e} below -{UNDERSHOOT_TOL:g}",
            time=t + dt,
            dt=dt,
            min_component=lowest,
        )
    if lowest < 0:
        logger.debug("clipping undershoot %.3e at t=%.6g", lowest, t + dt)
        values = np.maximum(values, 0.0)
        values /= values.sum(axis=-1, keepdims=True)
    return field.evolve(values, t + dt)


def dissipation_rates(config: SimConfig, field: Field) -> tuple[float, float]:
    """Diffusive and reactive parts of dPsi/dt for the semidiscrete system.

    Both are non-positive; NaN when some cell is not interior.
    """
    if not field.is_interior:
        return float("nan"), float("nan")
    spec, grid = config.spec, config.grid
    mu = chemical_potential(spec, config.reference_state, field.values)
    diffusive = 0.0
    for axis, (h, area) in enumerate(zip(grid.spacing, grid.face_areas)):
        flux = _axis_fluxes(spec, field.values, axis, h)
        n = mu.shape[axis]
        jump = mu.take(np.arange(1, n), axis=axis) - mu.take(np.arange(n - 1), axis=axis)
        diffusive -= area * float((jump * flux).sum())
    reactive = 0.0
    reaction = reaction_values(config, field.values)
    if reaction is not None:
        reactive = grid.cell_volume * float((mu * reaction).sum())
    return diffusive / spec.rho, reactive / spec.rho


__all__ = [
    "LEAK_TOL",
    "UNDERSHOOT_TOL",
    "SourceHook",
    "dissipation_rates",
    "face_flux",
    "flux_divergence",
    "mass_leak",
    "reaction_values",
    "semidiscrete_rhs",
    "stable_dt",
    "step_rk4",
]
