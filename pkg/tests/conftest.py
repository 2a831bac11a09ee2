from pathlib import Path

import numpy as np
from pytest import FixtureRequest, fixture

from msdiff.kinetics import ReactionNetwork
from msdiff.mixture import MixtureSpec


@fixture
def root_dir(request: FixtureRequest) -> Path:
    return request.config.rootpath


@fixture
def scenarios_dir(root_dir: Path) -> Path:
    return root_dir / "scenarios"


# each test runs with cwd set to its own temp dir, so outputs never collide
@fixture(autouse=True)
def go_to_tmpdir(request: FixtureRequest):
    tmpdir = request.getfixturevalue("tmpdir")
    with tmpdir.as_cwd():
        yield


@fixture
def two_species() -> MixtureSpec:
    """M = (1, 1), f12 = 1, rho = 1: the A0 eigenvalue on E is 1 everywhere."""
    return MixtureSpec.from_upper_triangle([1.0, 1.0], [[1.0]], 1.0)


@fixture
def isomerization() -> ReactionNetwork:
    """A1 <-> A2 with k+ = 2, k- = 1; equilibrium c* = (1/3, 2/3)."""
    return ReactionNetwork.from_reactions(2, [([1, 0], [0, 1], 2.0, 1.0)])


@fixture
def association_spec() -> MixtureSpec:
    return MixtureSpec.from_upper_triangle([1.0, 1.0, 2.0], [[1.0, 1.5], [2.0]], 1.0)


@fixture
def association() -> ReactionNetwork:
    """A1 + A2 <-> A3 with unit rate constants."""
    return ReactionNetwork.from_reactions(3, [([1, 1, 0], [0, 0, 1], 1.0, 1.0)])


@fixture
def association_equilibrium() -> np.ndarray:
    """Symmetric equilibrium y* for M = (1, 1, 2), rho = 1: c* = (a, a, a^2)."""
    a = (np.sqrt(3.0) - 1.0) / 2.0
    return np.array([a, a, 2 * a * a])
