"""Randomized property battery run by ``msdiff verify``.

Every check draws seeded random mixtures and compositions (boundary points
included) and records the worst residual of each structural property.
"""

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
import logging
import math
from multiprocessing.pool import ThreadPool
from typing import Any, Iterable

import numpy as np
from numpy.random import Generator
from tqdm import tqdm

from msdiff.equilibria import find_equilibrium
from msdiff.errors import MsdiffError
from msdiff.kinetics import (
    ReactionNetwork,
    reaction_entropy_production,
    source_term,
    stoichiometric_rank,
)
from msdiff import mixture
from msdiff.mixture import SPECTRAL_MARGIN, MixtureSpec, Vector, e_basis
from msdiff.stability import (
    eigenpairs,
    mode_matrix,
    reaction_jacobian,
    spectral_identity_residual,
)

logger = logging.getLogger(__name__)

NETWORKS_PER_SIZE = 3
FD_STEP = 1e-7
LAPLACE_CHECKS = (0.0, float(np.pi**2))

TOLERANCES = {
    "kernel": 1e-12,
    "symmetrization": 1e-11,
    "inversion": 1e-10,
    "boundary-rows": 1e-10,
    "spectral-positivity": 0.0,
    "definiteness": 1e-10,
    "entropy-production": 1e-12,
    "equilibrium-entropy": 1e-10,
    "reaction-jacobian": 1e-5,
    "spectral-identity": 1e-8,
}

# residual must stay strictly below the tolerance
STRICT = frozenset({"spectral-positivity"})

Check = tuple[str, float, dict[str, Any]]


@dataclass
class PropertyOutcome:
    name: str
    passed: int = 0
    failed: int = 0
    worst: float = -math.inf
    first_failure: dict[str, Any] | None = None

    def record(self, residual: float, context: dict[str, Any]) -> None:
        tolerance = TOLERANCES[self.name]
        within = residual < tolerance if self.name in STRICT else residual <= tolerance
        ok = bool(np.isfinite(residual)) and bool(within)
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if self.first_failure is None:
                finite = residual if np.isfinite(residual) else None
                self.first_failure = {"residual": finite, **context}
        if np.isnan(residual) or residual > self.worst:
            self.worst = residual

    def as_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "failed": self.failed,
            "worst_residual": self.worst if np.isfinite(self.worst) else None,
            "tolerance": TOLERANCES[self.name],
            "first_failure": self.first_failure,
        }


@dataclass
class BatteryReport:
    outcomes: dict[str, PropertyOutcome] = field(
        default_factory=lambda: {name: PropertyOutcome(name) for name in TOLERANCES}
    )

    @property
    def ok(self) -> bool:
        return all(outcome.failed == 0 for outcome in self.outcomes.values())

    @property
    def failing(self) -> list[str]:
        return [name for name, outcome in self.outcomes.items() if outcome.failed]

    def add(self, checks: Iterable[Check]) -> None:
        for name, residual, context in checks:
            self.outcomes[name].record(residual, context)

    def as_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "failing": self.failing,
            "properties": {name: o.as_dict() for name, o in self.outcomes.items()},
        }


def random_spec(rng: Generator, n: int) -> MixtureSpec:
    """Integer molar masses so that mass-conserving reactions exist."""
    masses = rng.integers(1, 6, size=n).astype(float)
    upper = [list(rng.uniform(0.2, 5.0, size=n - 1 - i)) for i in range(n - 1)]
    return MixtureSpec.from_upper_triangle(masses, upper, float(rng.uniform(0.5, 2.0)))


def random_network(
    rng: Generator, spec: MixtureSpec
) -> tuple[MixtureSpec, ReactionNetwork]:
    """Independent isomerizations and associations A_i + A_j <-> A_k."""
    n = spec.n_species
    masses = spec.molar_masses
    candidates: list[tuple[Vector, Vector]] = []
    for i, j in combinations_with_replacement(range(n), 2):
        for k in range(n):
            if k not in (i, j) and masses[i] + masses[j] == masses[k]:
                forward = np.zeros(n, dtype=np.int64)
                forward[i] += 1
                forward[j] += 1
                candidates.append((forward, np.eye(n, dtype=np.int64)[k]))
        if i < j and masses[i] == masses[j]:
            candidates.append((np.eye(n, dtype=np.int64)[i], np.eye(n, dtype=np.int64)[j]))
    if not candidates:
        adjusted = spec.molar_masses.copy()
        adjusted[1] = adjusted[0]
        spec = MixtureSpec(adjusted, spec.frictions, spec.rho)
        candidates = [(np.eye(n, dtype=np.int64)[0], np.eye(n, dtype=np.int64)[1])]

    chosen: list[tuple[Vector, Vector]] = []
    for index in rng.permutation(len(candidates)):
        plus, minus = candidates[index]
        trial = np.array([p - m for p, m in chosen + [(plus, minus)]]).T
        if stoichiometric_rank(trial)[0] == len(chosen) + 1:
            chosen.append((plus, minus))
        if len(chosen) == n - 1:
            break
    reactions = [
        (plus, minus, float(np.exp(rng.uniform(-1, 1))), float(np.exp(rng.uniform(-1, 1))))
        for plus, minus in chosen
    ]
    return spec, ReactionNetwork.from_reactions(n, reactions)


def random_composition(rng: Generator, n: int, boundary: bool) -> Vector:
    y = 0.9 * rng.dirichlet(np.ones(n)) + 0.1 / n
    if boundary and n > 2:
        zeros = rng.choice(n, size=int(rng.integers(1, n - 1)), replace=False)
        y[zeros] = 0.0
    return y / y.sum()


def _relative(value: float, scale: float) -> float:
    return float(value / max(1.0, scale))


def mixture_checks(spec: MixtureSpec, y: Vector, h: Vector) -> list[Check]:
    n = spec.n_species
    context = {"n_species": n, "y": y.tolist()}
    b = mixture.assemble_B(spec, y)
    scale = float(np.abs(b).max())
    checks: list[Check] = [
        ("kernel", _relative(np.abs(b @ y).max(), scale), context),
        ("kernel", _relative(np.abs(b.sum(axis=0)).max(), scale), context),
    ]
    interior = bool(np.all(y > 0))
    if interior:
        bs = mixture.symmetrize_B(spec, y)
        asymmetry = np.abs(bs - bs.T).max()
        top = float(np.linalg.eigvalsh(0.5 * (bs + bs.T)).max())
        checks.append(("symmetrization", _relative(max(asymmetry, top), scale), context))
        kernel = np.abs(bs @ np.sqrt(y)).max()
        checks.append(("symmetrization", _relative(kernel, scale), context))

    try:
        x = mixture.apply_inverse_on_E(spec, y, h)
        error = float(np.linalg.norm(b @ x - h) / np.linalg.norm(h))
        checks.append(("inversion", error, context))
        zero = y == 0
        if np.any(zero):
            expected = h[zero] / np.diag(b)[zero]
            mismatch = np.abs(x[zero] - expected).max()
            checks.append(
                ("boundary-rows", _relative(mismatch, np.abs(expected).max()), context)
            )
        a0 = mixture.flux_matrix_A0(spec, y)
        eigenvalues = mixture.spectrum_on_E(a0)
        margin = SPECTRAL_MARGIN * float(np.linalg.norm(a0.basis_rep))
        checks.append(
            ("spectral-positivity", margin - float(eigenvalues.real.min()), context)
        )
        g = mixture.definiteness_matrix(spec, y)
        g_scale = float(np.abs(g).max())
        symmetric = 0.5 * (g + g.T)
        lowest = float(np.linalg.eigvalsh(symmetric).min())
        residual = max(np.abs(g - g.T).max(), -lowest) / max(g_scale, np.finfo(float).tiny)
        if interior:
            q = e_basis(n)
            on_e = float(np.linalg.eigvalsh(q.T @ symmetric @ q).min())
            if on_e <= 0:
                residual = float("inf")
        checks.append(("definiteness", float(residual), context))
    except MsdiffError as e:
        failure = {**context, "error": e.code}
        checks.extend(
            (name, float("inf"), failure)
            for name in ("inversion", "spectral-positivity", "definiteness")
        )
    return checks


def _finite_difference_jacobian(
    net: ReactionNetwork, spec: MixtureSpec, y_star: Vector
) -> np.ndarray:
    n = spec.n_species
    jacobian = np.zeros((n, n))
    for j in range(n):
        step = FD_STEP * y_star[j]
        plus, minus = y_star.copy(), y_star.copy()
        plus[j] += step
        minus[j] -= step
        difference = source_term(net, spec, plus) - source_term(net, spec, minus)
        jacobian[:, j] = difference / (2 * step)
    return jacobian


def network_checks(
    spec: MixtureSpec, net: ReactionNetwork, samples: list[Vector]
) -> list[Check]:
    context: dict[str, Any] = {"n_species": spec.n_species, "reactions": net.m}
    try:
        equilibrium = find_equilibrium(net, spec)
    except MsdiffError as e:
        return [("equilibrium-entropy", float("inf"), {**context, "error": e.code})]
    ref = equilibrium.reference()
    y_star = equilibrium.y_star.y
    checks: list[Check] = []
    for y in samples:
        production = float(reaction_entropy_production(spec, net, ref, y))
        scale = float(np.abs(source_term(net, spec, y)).sum())
        sample = {**context, "y": y.tolist()}
        checks.append(("entropy-production", _relative(production, scale), sample))
    at_equilibrium = abs(float(reaction_entropy_production(spec, net, ref, y_star)))
    checks.append(("equilibrium-entropy", at_equilibrium, context))

    exact = reaction_jacobian(net, spec, y_star)
    approx = _finite_difference_jacobian(net, spec, y_star)
    scale = max(float(np.abs(exact).max()), np.finfo(float).tiny)
    checks.append(("reaction-jacobian", float(np.abs(exact - approx).max()) / scale, context))
    for lam in LAPLACE_CHECKS:
        values, vectors = eigenpairs(mode_matrix(spec, net, y_star, lam))
        for value, vector in zip(values, vectors.T):
            if abs(value) <= 1e-10 * max(1.0, np.abs(values).max()):
                continue
            residual = spectral_identity_residual(spec, net, y_star, lam, value, vector)
            checks.append(("spectral-identity", residual, {**context, "lambda": lam}))
    return checks


def checks_for_size(n: int, trials: int, seed: int) -> list[Check]:
    rng = np.random.default_rng([seed, n])
    checks: list[Check] = []
    networks = []
    for _ in range(NETWORKS_PER_SIZE):
        spec, net = random_network(rng, random_spec(rng, n))
        networks.append((spec, net, []))
    for trial in range(trials):
        spec = random_spec(rng, n)
        y = random_composition(rng, n, boundary=trial % 2 == 1)
        h = rng.standard_normal(n)
        h -= h.mean()
        checks.extend(mixture_checks(spec, y, h))
        net_spec, _, samples = networks[trial % NETWORKS_PER_SIZE]
        samples.append(random_composition(rng, net_spec.n_species, boundary=False))
    for spec, net, samples in networks:
        checks.extend(network_checks(spec, net, samples))
    return checks


def run_battery(
    species_counts: Iterable[int],
    trials: int,
    seed: int,
    max_workers: int = 1,
    progress: bool = False,
) -> BatteryReport:
    counts = list(species_counts)
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    if not counts or min(counts) < 2:
        raise ValueError(f"species counts must be at least 2, got {counts}")
    report = BatteryReport()

    def run(n: int) -> list[Check]:
        return checks_for_size(n, trials, seed)

    with ThreadPool(max(1, max_workers)) as p:
        for checks in tqdm(
            p.imap(run, counts),
            total=len(counts),
            desc="verify",
            disable=None if progress else True,
        ):
            report.add(checks)
    logger.info("property battery finished, failing: %s", report.failing or "none")
    return report


__all__ = [
    "STRICT",
    "TOLERANCES",
    "BatteryReport",
    "PropertyOutcome",
    "checks_for_size",
    "mixture_checks",
    "network_checks",
    "random_composition",
    "random_network",
    "random_spec",
    "run_battery",
]
