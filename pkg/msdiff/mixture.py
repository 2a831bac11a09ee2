"""Maxwell-Stefan friction matrix, its inverse on E and the flux matrix A0.

Notation: ``e = (1, ..., 1)``, ``E = {e}^perp``, ``P(y) = I - y e^T``,
``A(y) = (B(y)|_E)^-1`` and ``A0(y) = -A(y) P(y) M^-1``.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
import logging
import warnings

import numpy as np
from numpy.typing import ArrayLike, NDArray
import scipy.linalg
from scipy.linalg import LinAlgWarning

from msdiff.errors import (
    DimensionMismatch,
    EigenSolverFailure,
    InadmissibleComposition,
    NonInteriorComposition,
    NotInE,
    SingularSystem,
)

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-8
INTERIOR_EPS = 1e-12
SUM_TOL = 1e-12
E_TOL = 1e-10
SPECTRAL_MARGIN = 1e-10

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    """Species data of a mixture with constant friction coefficients.

    ``frictions`` is the full symmetric matrix f with zero diagonal.
    """

    molar_masses: Vector
    frictions: Matrix
    rho: float

    def __post_init__(self) -> None:
        masses = np.array(self.molar_masses, dtype=float)
        frictions = np.array(self.frictions, dtype=float)
        object.__setattr__(self, "molar_masses", masses)
        object.__setattr__(self, "frictions", frictions)
        object.__setattr__(self, "rho", float(self.rho))
        masses.setflags(write=False)
        frictions.setflags(write=False)

        n = masses.size
        if masses.ndim != 1 or n < 2:
            raise DimensionMismatch(f"need at least 2 species, got masses {masses}")
        if frictions.shape != (n, n):
            raise DimensionMismatch(
                f"friction matrix has shape {frictions.shape}, expected {(n, n)}"
            )
        if not np.all(masses > 0) or not np.all(np.isfinite(masses)):
            raise ValueError(f"molar masses must be positive, got {masses}")
        if not (self.rho > 0 and np.isfinite(self.rho)):
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not np.array_equal(frictions, frictions.T):
            raise ValueError("friction matrix must be exactly symmetric")
        if np.any(np.diag(frictions) != 0):
            raise ValueError("friction matrix must have a zero diagonal")
        off_diagonal = frictions[~np.eye(n, dtype=bool)]
        if not np.all(off_diagonal > 0) or not np.all(np.isfinite(off_diagonal)):
            raise ValueError("off-diagonal friction coefficients must be positive")

    @property
    def n_species(self) -> int:
        return self.molar_masses.size

    @classmethod
    def from_upper_triangle(
        cls, molar_masses: ArrayLike, upper: list[list[float]], rho: float
    ) -> "MixtureSpec":
        """Build a spec from rows of the strict upper triangle.

        Row ``i`` lists ``f[i, i+1], ..., f[i, N-1]``.
        """
        masses = np.asarray(molar_masses, dtype=float)
        n = masses.size
        if len(upper) != n - 1 or any(
            len(row) != n - 1 - i for i, row in enumerate(upper)
        ):
            raise DimensionMismatch(
                f"friction upper triangle does not match {n} species: {upper}"
            )
        frictions = np.zeros((n, n))
        for i, row in enumerate(upper):
            frictions[i, i + 1 :] = row
        frictions = frictions + frictions.T
        return cls(masses, frictions, rho)


class CompositionKind(Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"


def classify(
    y: ArrayLike,
    *,
    boundary_tol: float = BOUNDARY_TOL,
    interior_eps: float = INTERIOR_EPS,
) -> CompositionKind:
    values = np.asarray(y, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise DimensionMismatch(f"composition must be a vector, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise InadmissibleComposition(f"composition is not finite: {values}")
    if abs(values.sum() - 1.0) > SUM_TOL:
        raise InadmissibleComposition(
            f"mass fractions sum to {values.sum():.17g}, not 1", sum=float(values.sum())
        )
    if values.min() < -boundary_tol:
        raise InadmissibleComposition(
            f"component {int(values.argmin())} is {values.min():.3e} < -{boundary_tol:g}",
            min_component=float(values.min()),
        )
    if values.min() >= interior_eps:
        return CompositionKind.INTERIOR
    return CompositionKind.BOUNDARY


@dataclass(frozen=True, eq=False)
class Composition:
    """A point of the admissible neighborhood of the simplex D."""

    y: Vector
    kind: CompositionKind

    @classmethod
    def of(cls, values: ArrayLike) -> "Composition":
        y = np.array(values, dtype=float)
        kind = classify(y)
        y.setflags(write=False)
        return cls(y, kind)

    @property
    def is_interior(self) -> bool:
        return self.kind is CompositionKind.INTERIOR


CompositionLike = Composition | ArrayLike


def as_vector(y: CompositionLike, n_species: int | None = None) -> Vector:
    values = np.asarray(y.y if isinstance(y, Composition) else y, dtype=float)
    if values.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {values.shape}")
    if n_species is not None and values.size != n_species:
        raise DimensionMismatch(
            f"vector has {values.size} components, mixture has {n_species} species"
        )
    return values


def require_interior(y: Vector) -> None:
    if np.any(y <= 0):
        raise NonInteriorComposition(
            f"composition has non-positive component {y.min():.3e}",
            min_component=float(y.min()),
        )


@lru_cache(maxsize=None)
def e_basis(n: int) -> Matrix:
    """Orthonormal basis of E as the columns of an ``n x (n-1)`` matrix.

    Columns 2..n of the Householder reflector that maps e/sqrt(n) to the
    first coordinate axis.
    """
    w = np.full(n, 1.0 / np.sqrt(n))
    w[0] -= 1.0
    householder = np.eye(n) - 2.0 * np.outer(w, w) / (w @ w)
    basis = householder[:, 1:].copy()
    basis.setflags(write=False)
    return basis


@dataclass(frozen=True, eq=False)
class EMatrix:
    """A linear map of E, stored in full and in the fixed basis of E."""

    full: Matrix
    basis_rep: Matrix

    @classmethod
    def from_full(cls, full: ArrayLike) -> "EMatrix":
        matrix = np.array(full, dtype=float)
        n = matrix.shape[0]
        if matrix.shape != (n, n) or n < 2:
            raise DimensionMismatch(f"expected a square matrix, got {matrix.shape}")
        q = e_basis(n)
        leak = np.abs((matrix @ q).sum(axis=0))
        if np.any(leak > 1e-12 * max(1.0, float(np.abs(matrix).max()))):
            raise NotInE(f"matrix does not map E into E (leak {leak.max():.3e})")
        return cls(matrix, q.T @ matrix @ q)

    @property
    def dim(self) -> int:
        return self.basis_rep.shape[0]

    def apply(self, v: ArrayLike) -> Vector:
        return self.full @ np.asarray(v, dtype=float)


def assemble_B(spec: MixtureSpec, y: CompositionLike) -> Matrix:
    """Friction matrix: b_ij = f_ij y_i (i != j), b_ii = -sum_l f_il y_l."""
    values = as_vector(y, spec.n_species)
    b = spec.frictions * values[:, None]
    np.fill_diagonal(b, -(spec.frictions @ values))
    return b


def project_P(y: CompositionLike, v: ArrayLike) -> NDArray[np.float64]:
    """``v - (v|e) y``; broadcasts over leading axes of ``v``."""
    values = as_vector(y)
    vectors = np.asarray(v, dtype=float)
    if vectors.shape[-1] != values.size:
        raise DimensionMismatch(
            f"vector length {vectors.shape[-1]} does not match composition {values.size}"
        )
    return vectors - vectors.sum(axis=-1, keepdims=True) * values


def symmetrize_B(spec: MixtureSpec, y: CompositionLike) -> Matrix:
    values = as_vector(y, spec.n_species)
    require_interior(values)
    root = np.sqrt(values)
    return assemble_B(spec, values) * root[None, :] / root[:, None]


def bordered_matrix(spec: MixtureSpec, y: CompositionLike) -> Matrix:
    values = as_vector(y, spec.n_species)
    n = values.size
    d = np.zeros((n + 1, n + 1))
    d[:n, :n] = assemble_B(spec, values)
    d[:n, n] = values
    d[n, :n] = 1.0
    return d


def _bordered_solve(spec: MixtureSpec, y: Vector, rhs: Matrix) -> Matrix:
    """Solve ``D(y) [x; a] = [rhs; 0]`` column by column, return ``x``."""
    classify(y)
    d = bordered_matrix(spec, y)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(d)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * d.shape[0] * np.abs(d).max():
        raise SingularSystem(
            "bordered Maxwell-Stefan system is singular",
            min_pivot=float(pivots.min()),
        )
    n = spec.n_species
    padded = np.zeros((n + 1,) + rhs.shape[1:])
    padded[:n] = rhs
    return scipy.linalg.lu_solve((lu, piv), padded)[:n]


def apply_inverse_on_E(
    spec: MixtureSpec, y: CompositionLike, h: ArrayLike
) -> Vector:
    """x = (B(y)|_E)^-1 h for h in E, via the bordered system."""
    values = as_vector(y, spec.n_species)
    rhs = as_vector(h, spec.n_species)
    if abs(rhs.sum()) > E_TOL * max(1.0, float(np.abs(rhs).max())):
        raise NotInE(f"(h|e) = {rhs.sum():.3e} is not zero", sum=float(rhs.sum()))
    return _bordered_solve(spec, values, rhs)


def inverse_coefficients(
    spec: MixtureSpec, y: CompositionLike
) -> tuple[Vector, Matrix]:
    """Coefficients a0, a1 with (A(y)h)_i = -a0_i h_i + y_i sum_{j!=i} a1_ij h_j.

    Rows of a1 belonging to vanishing components are zero.
    """
    values = as_vector(y, spec.n_species)
    full = _bordered_solve(spec, values, np.eye(spec.n_species))
    a0 = -np.diag(full).copy()
    a1 = np.zeros_like(full)
    nonzero = values != 0
    a1[nonzero] = full[nonzero] / values[nonzero, None]
    np.fill_diagonal(a1, 0.0)
    return a0, a1


def flux_matrix_A0(spec: MixtureSpec, y: CompositionLike) -> EMatrix:
    values = as_vector(y, spec.n_species)
    projected = project_P(values, np.diag(1.0 / spec.molar_masses)).T
    return EMatrix.from_full(-_bordered_solve(spec, values, projected))


def definiteness_matrix(spec: MixtureSpec, y: CompositionLike) -> Matrix:
    """G = -A(y) P(y) Y, assembled columnwise."""
    values = as_vector(y, spec.n_species)
    projected = project_P(values, np.diag(values)).T
    return -_bordered_solve(spec, values, projected)


def spectrum_on_E(m: EMatrix) -> NDArray[np.complex128]:
    try:
        eigenvalues = scipy.linalg.eigvals(m.basis_rep)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenSolverFailure(f"eigenvalue computation failed: {e}") from e
    order = np.lexsort((eigenvalues.imag, eigenvalues.real))
    return eigenvalues[order]


# Batched kernels for the solver: leading axes of Y index faces or cells.


def _bordered_batch(spec: MixtureSpec, states: NDArray[np.float64]) -> NDArray[np.float64]:
    n = spec.n_species
    d = np.zeros(states.shape[:-1] + (n + 1, n + 1))
    b = spec.frictions * states[..., :, None]
    idx = np.arange(n)
    b[..., idx, idx] = -(states @ spec.frictions)
    d[..., :n, :n] = b
    d[..., :n, n] = states
    d[..., n, :n] = 1.0
    return d


def _solve_batch(
    spec: MixtureSpec, states: NDArray[np.float64], rhs: NDArray[np.float64]
) -> NDArray[np.float64]:
    n = spec.n_species
    padded = np.zeros(rhs.shape[:-2] + (n + 1, rhs.shape[-1]))
    padded[..., :n, :] = rhs
    try:
        return np.linalg.solve(_bordered_batch(spec, states), padded)[..., :n, :]
    except np.linalg.LinAlgError as e:
        raise SingularSystem(f"bordered Maxwell-Stefan system is singular: {e}") from e


def flux_matrix_apply(
    spec: MixtureSpec, states: ArrayLike, gradients: ArrayLike
) -> NDArray[np.float64]:
    """A0(y) g for stacks of states ``y`` and vectors ``g`` (shape ``(..., N)``)."""
    y = np.asarray(states, dtype=float)
    g = np.asarray(gradients, dtype=float) / spec.molar_masses
    h = g - g.sum(axis=-1, keepdims=True) * y
    return -_solve_batch(spec, y, h[..., None])[..., 0]


def flux_spectral_radius(spec: MixtureSpec, states: ArrayLike) -> NDArray[np.float64]:
    """Spectral radius of A0(y) on E for each state of a stack."""
    y = np.asarray(states, dtype=float)
    q = e_basis(spec.n_species)
    scaled = q / spec.molar_masses[:, None]
    rhs = scaled - y[..., :, None] * scaled.sum(axis=0)
    images = -_solve_batch(spec, y, rhs)
    basis_rep = q.T @ images
    try:
        eigenvalues = np.linalg.eigvals(basis_rep)
    except np.linalg.LinAlgError as e:
        raise EigenSolverFailure(f"eigenvalue computation failed: {e}") from e
    return np.abs(eigenvalues).max(axis=-1)
