"""Reversible mass-action kinetics, chemical potentials and free energy."""

from dataclasses import dataclass, field
import logging
from typing import Any, Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
import scipy.linalg
from scipy.special import xlogy

from msdiff.errors import (
    DimensionMismatch,
    InadmissibleComposition,
    MassNotConserved,
    NegativeConcentration,
    NoEquilibrium,
    NotAnEquilibrium,
)
from msdiff.mixture import (
    BOUNDARY_TOL,
    CompositionLike,
    MixtureSpec,
    Vector,
    as_vector,
    classify,
    require_interior,
)

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10
WEGSCHEIDER_TOL = 1e-10
EQUILIBRIUM_TOL = 1e-10

IntMatrix = NDArray[np.int64]


def _stoichiometry(values: ArrayLike, n_species: int, name: str) -> IntMatrix:
    array = np.asarray(values, dtype=float)
    if array.size == 0:
        array = array.reshape(n_species, 0)
    if array.ndim != 2 or array.shape[0] != n_species:
        raise DimensionMismatch(f"{name} must have {n_species} rows, got {array.shape}")
    if np.any(array < 0) or np.any(array != np.round(array)):
        raise ValueError(f"{name} must contain non-negative integers")
    return array.astype(np.int64)


@dataclass(frozen=True, eq=False)
class ReactionNetwork:
    """m reversible reactions nu_plus -> nu_minus with rate constants k+/k-.

    Columns of ``nu_plus``/``nu_minus`` are reactions, rows are species.
    """

    nu_plus: IntMatrix
    nu_minus: IntMatrix
    k_plus: Vector
    k_minus: Vector

    def __post_init__(self) -> None:
        n = np.asarray(self.nu_plus).shape[0] if np.ndim(self.nu_plus) == 2 else 0
        nu_plus = _stoichiometry(self.nu_plus, n, "nu_plus")
        nu_minus = _stoichiometry(self.nu_minus, n, "nu_minus")
        k_plus = np.atleast_1d(np.asarray(self.k_plus, dtype=float))
        k_minus = np.atleast_1d(np.asarray(self.k_minus, dtype=float))
        m = nu_plus.shape[1]
        if nu_minus.shape != nu_plus.shape or k_plus.shape != (m,) or k_minus.shape != (m,):
            raise DimensionMismatch(
                f"inconsistent network shapes: nu_plus {nu_plus.shape}, nu_minus {nu_minus.shape}, "
                f"k_plus {k_plus.shape}, k_minus {k_minus.shape}"
            )
        if not (np.all(k_plus > 0) and np.all(k_minus > 0)):
            raise ValueError("rate constants must be strictly positive")
        if not (np.all(np.isfinite(k_plus)) and np.all(np.isfinite(k_minus))):
            raise ValueError("rate constants must be finite")
        zero_columns = np.flatnonzero(np.all(nu_plus == nu_minus, axis=0))
        if zero_columns.size:
            raise ValueError(f"reactions {zero_columns.tolist()} have no net effect")
        for name, value in (
            ("nu_plus", nu_plus),
            ("nu_minus", nu_minus),
            ("k_plus", k_plus),
            ("k_minus", k_minus),
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def empty(cls, n_species: int) -> "ReactionNetwork":
        zeros = np.zeros((n_species, 0), dtype=np.int64)
        return cls(zeros, zeros, np.zeros(0), np.zeros(0))

    @classmethod
    def from_reactions(
        cls,
        n_species: int,
        reactions: Iterable[tuple[Sequence[int], Sequence[int], float, float]],
    ) -> "ReactionNetwork":
        """Build from ``(nu_plus, nu_minus, k_plus, k_minus)`` tuples."""
        reactions = list(reactions)
        if not reactions:
            return cls.empty(n_species)
        nu_plus = np.array([r[0] for r in reactions]).T
        nu_minus = np.array([r[1] for r in reactions]).T
        if nu_plus.shape[0] != n_species:
            raise DimensionMismatch(
                f"reactions have {nu_plus.shape[0]} coefficients, mixture has {n_species} species"
            )
        return cls(nu_plus, nu_minus, [r[2] for r in reactions], [r[3] for r in reactions])

    @property
    def n_species(self) -> int:
        return self.nu_plus.shape[0]

    @property
    def m(self) -> int:
        return self.nu_plus.shape[1]

    @property
    def nu(self) -> IntMatrix:
        return self.nu_plus - self.nu_minus

    @property
    def log_K(self) -> Vector:
        return np.log(self.k_minus) - np.log(self.k_plus)


def _monomials(c: NDArray[np.float64], exponents: IntMatrix) -> NDArray[np.float64]:
    # numpy evaluates 0.0 ** 0 as 1.0
    return np.prod(c[..., :, None] ** exponents, axis=-2)


def elementary_rates(net: ReactionNetwork, c: ArrayLike) -> NDArray[np.float64]:
    """-k+ c^nu+ + k- c^nu- for each reaction; broadcasts over leading axes."""
    conc = np.asarray(c, dtype=float)
    if conc.shape[-1] != net.n_species:
        raise DimensionMismatch(
            f"concentration has {conc.shape[-1]} components, network has {net.n_species} species"
        )
    if np.any(conc < 0):
        raise NegativeConcentration(
            f"negative concentration {conc.min():.3e}", min_concentration=float(conc.min())
        )
    return -net.k_plus * _monomials(conc, net.nu_plus) + net.k_minus * _monomials(
        conc, net.nu_minus
    )


def concentrations(spec: MixtureSpec, y: ArrayLike) -> NDArray[np.float64]:
    return spec.rho * np.asarray(y, dtype=float) / spec.molar_masses


def source_term(
    net: ReactionNetwork, spec: MixtureSpec, y: ArrayLike
) -> NDArray[np.float64]:
    """M r(y) = M nu r(rho M^-1 y); broadcasts over leading axes of ``y``."""
    values = np.asarray(y, dtype=float)
    if values.shape[-1] != spec.n_species or net.n_species != spec.n_species:
        raise DimensionMismatch("network, mixture and composition disagree on N")
    if net.m == 0:
        return np.zeros_like(values)
    if np.any(values < -BOUNDARY_TOL):
        raise InadmissibleComposition(
            f"composition component {values.min():.3e} below -{BOUNDARY_TOL:g}"
        )
    rates = elementary_rates(net, concentrations(spec, np.maximum(values, 0.0)))
    return spec.molar_masses * (rates @ net.nu.T)


@dataclass(frozen=True, eq=False)
class ReferenceEquilibrium:
    y_star: Vector
    c_star: Vector

    @classmethod
    def from_composition(
        cls,
        spec: MixtureSpec,
        y_star: CompositionLike,
        net: ReactionNetwork | None = None,
    ) -> "ReferenceEquilibrium":
        values = np.array(as_vector(y_star, spec.n_species))
        classify(values)
        require_interior(values)
        c_star = concentrations(spec, values)
        if net is not None and net.m:
            residual = equilibrium_residual(net, c_star)
            if residual > EQUILIBRIUM_TOL:
                raise NotAnEquilibrium(
                    f"reference is not a chemical equilibrium (residual {residual:.3e})",
                    residual=residual,
                )
        values.setflags(write=False)
        c_star.setflags(write=False)
        return cls(values, c_star)


def equilibrium_residual(net: ReactionNetwork, c: ArrayLike) -> float:
    """max_l |(nu_l | log c) - log K_l| over all reactions."""
    if net.m == 0:
        return 0.0
    return float(np.abs(net.nu.T @ np.log(np.asarray(c, dtype=float)) - net.log_K).max())


def chemical_potential(
    spec: MixtureSpec, ref: ReferenceEquilibrium, y: ArrayLike
) -> NDArray[np.float64]:
    values = np.asarray(y, dtype=float)
    require_interior(values)
    return np.log(values / ref.y_star) / spec.molar_masses


def free_energy_density(
    spec: MixtureSpec, ref: ReferenceEquilibrium, y: ArrayLike
) -> NDArray[np.float64] | float:
    """psi(y) = sum_k (y_k / M_k)(log(y_k / y*_k) - 1), with 0 log 0 = 0."""
    values = np.asarray(y, dtype=float)
    psi = ((xlogy(values, values / ref.y_star) - values) / spec.molar_masses).sum(axis=-1)
    return float(psi) if np.ndim(psi) == 0 else psi


def reaction_entropy_production(
    spec: MixtureSpec,
    net: ReactionNetwork,
    ref: ReferenceEquilibrium,
    y: ArrayLike,
) -> NDArray[np.float64] | float:
    """(mu(y) | M r(y)); non-positive on the interior of D."""
    values = np.asarray(y, dtype=float)
    production = (
        chemical_potential(spec, ref, values) * source_term(net, spec, values)
    ).sum(axis=-1)
    return float(production) if np.ndim(production) == 0 else production


def stoichiometric_rank(nu: ArrayLike) -> tuple[int, tuple[int, ...]]:
    """Rank of nu and a maximal independent set of columns (column-pivoted QR)."""
    matrix = np.asarray(nu, dtype=float)
    if matrix.shape[1] == 0:
        return 0, ()
    _, r, piv = scipy.linalg.qr(matrix, mode="economic", pivoting=True)
    tol = RANK_RTOL * np.linalg.norm(matrix, 2)
    rank = int(np.count_nonzero(np.abs(np.diag(r)) > tol))
    return rank, tuple(sorted(int(i) for i in piv[:rank]))


@dataclass(frozen=True)
class ValidationReport:
    mass_conserving: tuple[bool, ...]
    rank: int
    independent: tuple[int, ...]
    dependent: tuple[int, ...]
    alpha: NDArray[np.float64] = field(repr=False)
    wegscheider_residuals: tuple[float, ...]

    @property
    def wegscheider_consistent(self) -> tuple[bool, ...]:
        return tuple(r <= WEGSCHEIDER_TOL for r in self.wegscheider_residuals)

    @property
    def conserves_mass(self) -> bool:
        return all(self.mass_conserving)

    @property
    def has_equilibrium(self) -> bool:
        return all(self.wegscheider_consistent)

    @property
    def ok(self) -> bool:
        return self.conserves_mass and self.has_equilibrium

    def raise_for_problems(self) -> None:
        if not self.conserves_mass:
            violating = [i for i, ok in enumerate(self.mass_conserving) if not ok]
            raise MassNotConserved(
                f"reactions {violating} violate (nu_l | M e) = 0", reactions=violating
            )
        if not self.has_equilibrium:
            violating = [
                l for l, ok in zip(self.dependent, self.wegscheider_consistent) if not ok
            ]
            raise NoEquilibrium(
                f"equilibrium constants of reactions {violating} "
                "violate the Wegscheider conditions",
                reactions=violating,
            )

    def as_dict(self) -> dict[str, Any]:
        return {
            "mass_conserving": list(self.mass_conserving),
            "rank": self.rank,
            "independent": list(self.independent),
            "dependent": list(self.dependent),
            "alpha": self.alpha.tolist(),
            "wegscheider_consistent": list(self.wegscheider_consistent),
            "ok": self.ok,
        }


def validate_network(net: ReactionNetwork, spec: MixtureSpec) -> ValidationReport:
    if net.n_species != spec.n_species:
        raise DimensionMismatch(
            f"network has {net.n_species} species, mixture has {spec.n_species}"
        )
    nu = net.nu.astype(float)
    mass = spec.molar_masses
    balance = np.abs(nu.T @ mass)
    scale = np.abs(nu.T) @ mass
    mass_conserving = tuple(bool(b <= 1e-12 * s) for b, s in zip(balance, scale))

    rank, independent = stoichiometric_rank(nu)
    dependent = tuple(l for l in range(net.m) if l not in independent)
    alpha = np.zeros((len(dependent), rank))
    residuals: list[float] = []
    if dependent:
        nu_hat = nu[:, list(independent)]
        alpha, *_ = scipy.linalg.lstsq(nu_hat, nu[:, list(dependent)])
        alpha = alpha.T
        log_K = net.log_K
        for row, l in zip(alpha, dependent):
            residuals.append(float(abs(row @ log_K[list(independent)] - log_K[l])))

    report = ValidationReport(
        mass_conserving, rank, independent, dependent, alpha, tuple(residuals)
    )
    logger.debug("network validation: %s", report.as_dict())
    return report
