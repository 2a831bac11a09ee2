"""Linear stability of equilibria on box domains, mode by mode.

On a Neumann Laplacian eigenmode with eigenvalue -lambda the linearized
operator acts on E as lambda A0(y*) - M r'(y*).
"""

from dataclasses import dataclass
from itertools import product
import logging
from multiprocessing.pool import ThreadPool
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
import scipy.linalg
import scipy.stats

from msdiff.errors import (
    ConfigError,
    EigenSolverFailure,
    InsufficientDecay,
    NotAnEquilibrium,
    SemisimplicityUndecided,
)
from msdiff.kinetics import ReactionNetwork, concentrations, equilibrium_residual
from msdiff.mixture import (
    CompositionLike,
    EMatrix,
    Matrix,
    MixtureSpec,
    Vector,
    as_vector,
    classify,
    definiteness_matrix,
    e_basis,
    flux_matrix_A0,
    require_interior,
    spectrum_on_E,
)
from msdiff.solver.grid import Field
from msdiff.solver.simulation import Diagnostics

logger = logging.getLogger(__name__)

JACOBIAN_EQ_TOL = 1e-8
MIN_K_MAX = 8
SVD_RTOL = 1e-9
UNDECIDED_FACTOR = 100.0
DECAY_WINDOW = 1e-3
DECAY_FLOOR = 1e-11
MIN_DECADES = 2.0


def _equilibrium_state(
    net: ReactionNetwork, spec: MixtureSpec, y_star: CompositionLike
) -> tuple[Vector, Vector]:
    values = np.asarray(as_vector(y_star, spec.n_species))
    classify(values)
    require_interior(values)
    c_star = concentrations(spec, values)
    residual = equilibrium_residual(net, c_star)
    if residual > JACOBIAN_EQ_TOL:
        raise NotAnEquilibrium(
            f"y* is not a chemical equilibrium (residual {residual:.3e})", residual=residual
        )
    return values, c_star


def _equilibrium_rates(net: ReactionNetwork, c_star: Vector) -> Vector:
    """K_l = k-_l c*^nu-_l, the common value of both directions at equilibrium."""
    return net.k_minus * np.prod(c_star[:, None] ** net.nu_minus, axis=0)


def reaction_jacobian(
    net: ReactionNetwork, spec: MixtureSpec, y_star: CompositionLike
) -> Matrix:
    """M r'(y*) = -M nu K nu^T Y*^-1."""
    values, c_star = _equilibrium_state(net, spec, y_star)
    if net.m == 0:
        return np.zeros((spec.n_species, spec.n_species))
    nu = net.nu.astype(float)
    weighted = spec.molar_masses[:, None] * nu * _equilibrium_rates(net, c_star)
    return -(weighted @ nu.T) / values[None, :]


def mode_matrix(
    spec: MixtureSpec, net: ReactionNetwork, y_star: CompositionLike, lambda_laplace: float
) -> EMatrix:
    if lambda_laplace < 0:
        raise ValueError(f"Laplace eigenvalue must be non-negative, got {lambda_laplace}")
    jacobian = reaction_jacobian(net, spec, y_star)
    a0 = flux_matrix_A0(spec, y_star)
    return EMatrix.from_full(lambda_laplace * a0.full - jacobian)


def eigenpairs(matrix: EMatrix) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Eigenvalues and eigenvectors (columns, full coordinates) of a map of E."""
    try:
        values, vectors = scipy.linalg.eig(matrix.basis_rep)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenSolverFailure(f"eigen decomposition failed: {e}") from e
    return values, e_basis(matrix.full.shape[0]) @ vectors


def spectral_identity_residual(
    spec: MixtureSpec,
    net: ReactionNetwork,
    y_star: CompositionLike,
    lambda_laplace: float,
    eigenvalue: complex,
    eigenvector: ArrayLike,
) -> float:
    """Relative residual of

        ev (u | Y*^-1 M^-1 u) = lambda (G w | w) + (K nu^T Y*^-1 u | nu^T Y*^-1 u)

    with w = Y*^-1 M^-1 u and G = -A P Y at y*.
    """
    values, c_star = _equilibrium_state(net, spec, y_star)
    u = np.asarray(eigenvector, dtype=complex)
    w = u / (values * spec.molar_masses)
    lhs = eigenvalue * np.vdot(w, u)
    diffusive = lambda_laplace * np.vdot(w, definiteness_matrix(spec, values) @ w)
    reactive = 0.0
    if net.m:
        z = net.nu.T.astype(float) @ (u / values)
        reactive = np.vdot(z, _equilibrium_rates(net, c_star) * z)
    rhs = diffusive + reactive
    scale = max(abs(lhs), abs(diffusive) + abs(reactive), np.finfo(float).tiny)
    return float(abs(lhs - rhs) / scale)


@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    index: tuple[int, ...]
    lambda_laplace: float
    eigenvalues: NDArray[np.complex128]

    def as_dict(self) -> dict[str, Any]:
        return {
            "index": list(self.index),
            "lambda": self.lambda_laplace,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
        }


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    modes: list[ModeSpectrum]
    kernel_dim_mode0: int
    kernel_basis: Matrix
    semisimple: bool
    spectral_gap: float
    modes_used: int

    @property
    def mode_eigenvalues(self) -> dict[tuple[int, ...], NDArray[np.complex128]]:
        return {mode.index: mode.eigenvalues for mode in self.modes}

    def decay_rate(self, rho: float) -> float:
        """Exponential rate of y itself, since the operator acts on rho dy/dt."""
        return self.spectral_gap / rho

    def as_dict(self) -> dict[str, Any]:
        return {
            "modes": [mode.as_dict() for mode in self.modes],
            "kernel_dim": self.kernel_dim_mode0,
            "semisimple": self.semisimple,
            "gap": self.spectral_gap,
            "modes_used": self.modes_used,
        }


def laplace_modes(
    domain_lengths: Sequence[float], k_max: int
) -> list[tuple[tuple[int, ...], float]]:
    """Neumann eigenvalues sum_a (k_a pi / L_a)^2 for k_a in 0..k_max."""
    lengths = [float(length) for length in domain_lengths]
    return [
        (index, float(sum((k * np.pi / length) ** 2 for k, length in zip(index, lengths))))
        for index in product(range(k_max + 1), repeat=len(lengths))
    ]


def _kernel_dimension(matrix: Matrix, scale: float) -> tuple[int, Matrix]:
    """Numerical kernel dimension with tolerance SVD_RTOL * scale."""
    n = matrix.shape[0]
    if scale == 0.0:
        return n, np.eye(n)
    _, singular, vh = scipy.linalg.svd(matrix)
    tol = SVD_RTOL * scale
    straddling = (singular > tol / UNDECIDED_FACTOR) & (singular < tol * UNDECIDED_FACTOR)
    if np.any(straddling):
        raise SemisimplicityUndecided(
            "singular values too close to the kernel tolerance",
            tolerance=tol,
            singular_values=[float(s) for s in singular[straddling]],
        )
    small = singular <= tol
    return int(small.sum()), vh[small].conj().T


def spectrum_report(
    spec: MixtureSpec,
    net: ReactionNetwork,
    y_star: CompositionLike,
    domain_lengths: Sequence[float],
    k_max: int = MIN_K_MAX,
    max_workers: int = 1,
) -> SpectrumReport:
    if k_max < MIN_K_MAX:
        raise ConfigError(f"k_max must be at least {MIN_K_MAX}, got {k_max}")
    modes = laplace_modes(domain_lengths, k_max)

    def compute(mode: tuple[tuple[int, ...], float]) -> ModeSpectrum:
        index, lam = mode
        return ModeSpectrum(index, lam, spectrum_on_E(mode_matrix(spec, net, y_star, lam)))

    with ThreadPool(max(1, max_workers)) as p:
        spectra = list(p.imap(compute, modes))

    zero = mode_matrix(spec, net, y_star, 0.0).basis_rep
    norm = float(np.linalg.norm(zero, 2))
    kernel_dim, kernel_rep = _kernel_dimension(zero, norm)
    kernel_dim_sq, _ = _kernel_dimension(zero @ zero, norm**2)
    kernel_basis = e_basis(spec.n_species) @ kernel_rep.real

    # drop the kernel_dim smallest eigenvalues of mode 0, keep everything else
    remaining = [mode.eigenvalues for mode in spectra[1:]]
    mode0 = spectra[0].eigenvalues
    remaining.append(mode0[np.argsort(np.abs(mode0))][kernel_dim:])
    real_parts = np.concatenate([z.real for z in remaining])
    gap = float(real_parts.min()) if real_parts.size else float("inf")
    logger.info(
        "spectrum over %d modes: kernel %d, semisimple %s, gap %.6g",
        len(spectra),
        kernel_dim,
        kernel_dim == kernel_dim_sq,
        gap,
    )
    return SpectrumReport(
        modes=spectra,
        kernel_dim_mode0=kernel_dim,
        kernel_basis=kernel_basis,
        semisimple=kernel_dim == kernel_dim_sq,
        spectral_gap=gap,
        modes_used=k_max,
    )


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    window: tuple[float, float]
    points: int

    def as_dict(self) -> dict[str, Any]:
        return {
            "rate": self.rate,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "points": self.points,
        }


def _deviations(
    trajectory: Sequence[Field] | Sequence[Diagnostics], y_star: ArrayLike | None
) -> tuple[Vector, Vector, float]:
    """Times, deviations and the exponent relating them to the rate of y."""
    if all(isinstance(item, Diagnostics) for item in trajectory):
        diagnostics = [item for item in trajectory if isinstance(item, Diagnostics)]
        psi = np.array([d.free_energy for d in diagnostics])
        times = np.array([d.time for d in diagnostics])
        # relative free energy is quadratic in the deviation
        return times, np.abs(psi - psi[-1]), 2.0
    fields = [item for item in trajectory if isinstance(item, Field)]
    if len(fields) != len(trajectory):
        raise TypeError("trajectory mixes fields and diagnostics")
    limit = fields[-1].values if y_star is None else np.asarray(y_star, dtype=float)
    times = np.array([f.time for f in fields])
    deviations = np.array([np.abs(f.values - limit).max() for f in fields])
    return times, deviations, 1.0


def decay_rate_estimate(
    trajectory: Sequence[Field] | Sequence[Diagnostics], y_star: ArrayLike | None = None
) -> DecayFit:
    """Least-squares exponential rate of ||y(t) - y_inf||_inf.

    ``y_inf`` is ``y_star`` when given, else the last field. Diagnostics
    trajectories are fitted through Psi(t) - Psi(t_end) instead.
    """
    if len(trajectory) < 3:
        raise InsufficientDecay(f"need at least 3 records, got {len(trajectory)}")
    times, deviations, exponent = _deviations(trajectory, y_star)
    peak = float(deviations.max())
    if not peak > DECAY_FLOOR:
        raise InsufficientDecay("trajectory does not deviate from its limit", peak=peak)
    start = int(np.argmax(deviations))
    floor = max(DECAY_FLOOR, DECAY_WINDOW**exponent * peak)
    selected = np.arange(deviations.size) >= start
    selected &= deviations >= floor
    # stop at the first record below the floor
    below = np.flatnonzero(~selected[start:])
    if below.size:
        selected[start + below[0] :] = False
    points = int(selected.sum())
    if points < 3:
        raise InsufficientDecay("too few records inside the fitting window", points=points)
    span = np.log10(deviations[selected].max() / deviations[selected].min()) / exponent
    if span < MIN_DECADES:
        raise InsufficientDecay(
            f"deviation spans {span:.2f} decades, need {MIN_DECADES:g}", decades=float(span)
        )
    fit = scipy.stats.linregress(times[selected], np.log(deviations[selected]))
    window = (float(times[selected][0]), float(times[selected][-1]))
    return DecayFit(-float(fit.slope) / exponent, float(fit.rvalue**2), window, points)
