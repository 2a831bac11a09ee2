"""Positive chemical equilibria, their tangent spaces and conserved functionals."""

from dataclasses import dataclass
import logging
from typing import Any

import numpy as np
from numpy.typing import NDArray
import scipy.linalg

from msdiff.errors import DimensionMismatch, NewtonDiverged
from msdiff.kinetics import (
    ReactionNetwork,
    ReferenceEquilibrium,
    concentrations,
    stoichiometric_rank,
    validate_network,
)
from msdiff.mixture import (
    Composition,
    CompositionLike,
    Matrix,
    MixtureSpec,
    Vector,
    as_vector,
    classify,
    require_interior,
)

logger = logging.getLogger(__name__)

MAX_NEWTON_ITERATIONS = 100
MIN_STEP = 2.0**-30
ARMIJO_C = 1e-4
NEWTON_TOL = 1e-13
ACCEPT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    c_star: Vector
    y_star: Composition
    residual: float
    newton_iters: int
    manifold_dim: int

    def reference(self) -> ReferenceEquilibrium:
        return ReferenceEquilibrium(self.y_star.y, self.c_star)

    def as_dict(self) -> dict[str, Any]:
        return {
            "c_star": self.c_star.tolist(),
            "y_star": self.y_star.y.tolist(),
            "residual": self.residual,
            "newton_iters": self.newton_iters,
            "manifold_dim": self.manifold_dim,
        }


def _initial_composition(spec: MixtureSpec, init: CompositionLike | None) -> Vector:
    if init is None:
        return np.full(spec.n_species, 1.0 / spec.n_species)
    values = np.array(as_vector(init, spec.n_species))
    classify(values)
    require_interior(values)
    return values


def find_equilibrium(
    net: ReactionNetwork, spec: MixtureSpec, init: CompositionLike | None = None
) -> EquilibriumResult:
    """Damped Newton in xi = log c for nu_hat^T xi = log K_hat, (M e^xi | e) = rho.

    Underdetermined systems (equilibrium manifolds of positive dimension)
    take minimum-norm steps, so the result depends on ``init``.
    """
    report = validate_network(net, spec)
    report.raise_for_problems()
    n = spec.n_species
    s = report.rank
    y0 = _initial_composition(spec, init)
    if s == 0:
        y_star = Composition.of(y0)
        return EquilibriumResult(concentrations(spec, y0), y_star, 0.0, 0, n - 1)

    independent = list(report.independent)
    nu_hat_t = net.nu[:, independent].T.astype(float)
    log_K_hat = net.log_K[independent]
    masses = spec.molar_masses

    def equations(xi: Vector) -> Vector:
        with np.errstate(over="ignore"):
            mass = (masses * np.exp(xi)).sum() / spec.rho
        return np.append(nu_hat_t @ xi - log_K_hat, mass - 1.0)

    def jacobian(xi: Vector) -> Matrix:
        return np.vstack([nu_hat_t, masses * np.exp(xi) / spec.rho])

    xi = np.log(concentrations(spec, y0))
    residual = equations(xi)
    iterations = 0
    while np.abs(residual).max() > NEWTON_TOL:
        if iterations >= MAX_NEWTON_ITERATIONS:
            raise NewtonDiverged(
                f"Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations",
                residual=float(np.abs(residual).max()),
            )
        step, *_ = scipy.linalg.lstsq(jacobian(xi), -residual)
        merit = residual @ residual
        t = 1.0
        while True:
            candidate = equations(xi + t * step)
            if np.all(np.isfinite(candidate)) and candidate @ candidate <= (
                1.0 - 2.0 * ARMIJO_C * t
            ) * merit:
                break
            t /= 2.0
            if t < MIN_STEP:
                break
        iterations += 1
        if t < MIN_STEP:
            if np.abs(residual).max() <= ACCEPT_TOL:
                logger.debug("line search stalled at residual %.3e", np.abs(residual).max())
                break
            raise NewtonDiverged(
                "line search failed to reduce the residual",
                residual=float(np.abs(residual).max()),
                iterations=iterations,
            )
        xi = xi + t * step
        residual = candidate
        logger.debug("newton %d: step %.3g residual %.3e", iterations, t, np.abs(residual).max())

    c_star = np.exp(xi)
    y_star = Composition.of(masses * c_star / spec.rho)
    return EquilibriumResult(
        c_star,
        y_star,
        float(np.abs(residual[:-1]).max()),
        iterations,
        n - s - 1,
    )


def tangent_space(net: ReactionNetwork, y_star: CompositionLike) -> Matrix:
    """Orthonormal basis (as columns) of N(nu^T Y*^-1) intersected with E."""
    values = as_vector(y_star, net.n_species)
    require_interior(values)
    n = values.size
    s, independent = stoichiometric_rank(net.nu)
    rows = net.nu[:, list(independent)].T / values[None, :]
    stacked = np.vstack([rows, np.ones((1, n))])
    basis = scipy.linalg.null_space(stacked)
    if basis.shape[1] != n - s - 1:
        raise DimensionMismatch(
            f"tangent space has dimension {basis.shape[1]}, expected {n - s - 1}"
        )
    return basis


@dataclass(frozen=True, eq=False)
class ConservedFunctionals:
    """Orthonormal basis of S^perp, one functional per row.

    The normalized total-mass direction M e / |M e| comes first whenever it
    lies in S^perp.
    """

    basis: Matrix

    @property
    def count(self) -> int:
        return self.basis.shape[0]

    def evaluate(
        self, spec: MixtureSpec, values: NDArray[np.float64], cell_volume: float
    ) -> Vector:
        """I_q = sum over cells of vol * (q | rho M^-1 y_cell)."""
        totals = concentrations(spec, values).reshape(-1, spec.n_species).sum(axis=0)
        return self.basis @ (cell_volume * totals)


def total_mass_functional(spec: MixtureSpec) -> ConservedFunctionals:
    mass = spec.molar_masses / np.linalg.norm(spec.molar_masses)
    return ConservedFunctionals(mass[None, :])


def conserved_functionals(net: ReactionNetwork, spec: MixtureSpec) -> ConservedFunctionals:
    n = spec.n_species
    if net.m == 0:
        s_perp = np.eye(n)
    else:
        s_perp = scipy.linalg.null_space(net.nu.T.astype(float))
    mass = spec.molar_masses / np.linalg.norm(spec.molar_masses)
    coefficients = s_perp.T @ mass
    if np.linalg.norm(s_perp @ coefficients - mass) > 1e-10:
        return ConservedFunctionals(s_perp.T)
    remainder = s_perp - np.outer(mass, coefficients)
    if s_perp.shape[1] == 1:
        return ConservedFunctionals(mass[None, :])
    complement = scipy.linalg.orth(remainder)[:, : s_perp.shape[1] - 1]
    return ConservedFunctionals(np.vstack([mass, complement.T]))
