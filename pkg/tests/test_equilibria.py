import numpy as np
import pytest

from msdiff.equilibria import conserved_functionals, find_equilibrium, tangent_space
from msdiff.errors import MassNotConserved, NoEquilibrium, NonInteriorComposition
from msdiff.kinetics import ReactionNetwork, equilibrium_residual
from msdiff.mixture import MixtureSpec


def test_isomerization_equilibrium(two_species, isomerization):
    result = find_equilibrium(isomerization, two_species)
    np.testing.assert_allclose(result.c_star, [1 / 3, 2 / 3], atol=1e-12)
    np.testing.assert_allclose(result.y_star.y, [1 / 3, 2 / 3], atol=1e-12)
    assert result.manifold_dim == 0
    assert result.residual <= 1e-12
    assert result.as_dict()["manifold_dim"] == 0


def test_association_equilibrium(association_spec, association, association_equilibrium):
    result = find_equilibrium(association, association_spec)
    np.testing.assert_allclose(result.y_star.y, association_equilibrium, atol=1e-10)
    a = association_equilibrium[0]
    np.testing.assert_allclose(result.c_star, [a, a, a * a], atol=1e-10)
    assert result.manifold_dim == 1
    assert equilibrium_residual(association, result.c_star) <= 1e-10
    assert np.sum(association_spec.molar_masses * result.c_star) == pytest.approx(1.0)


def test_equilibrium_from_custom_start(association_spec, association):
    result = find_equilibrium(association, association_spec, [0.5, 0.2, 0.3])
    assert equilibrium_residual(association, result.c_star) <= 1e-10
    assert result.y_star.y.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(result.y_star.y > 0)


def test_equilibrium_without_reactions(association_spec):
    result = find_equilibrium(ReactionNetwork.empty(3), association_spec, [0.2, 0.3, 0.5])
    assert result.manifold_dim == 2
    assert result.newton_iters == 0
    np.testing.assert_allclose(result.y_star.y, [0.2, 0.3, 0.5])


def test_equilibrium_rejects_bad_networks(two_species):
    heavy = MixtureSpec.from_upper_triangle([1.0, 2.0], [[1.0]], 1.0)
    isomerization = ReactionNetwork.from_reactions(2, [([1, 0], [0, 1], 2.0, 1.0)])
    with pytest.raises(MassNotConserved):
        find_equilibrium(isomerization, heavy)
    duplicated = ReactionNetwork.from_reactions(
        2, [([1, 0], [0, 1], 2.0, 1.0), ([0, 1], [1, 0], 2.0, 1.0)]
    )
    with pytest.raises(NoEquilibrium):
        find_equilibrium(duplicated, two_species)


def test_equilibrium_rejects_boundary_start(association_spec, association):
    with pytest.raises(NonInteriorComposition):
        find_equilibrium(association, association_spec, [0.0, 0.5, 0.5])


def test_tangent_space(association, association_equilibrium):
    basis = tangent_space(association, association_equilibrium)
    assert basis.shape == (3, 1)
    v = basis[:, 0]
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert abs(v.sum()) <= 1e-12
    assert abs((association.nu[:, 0] / association_equilibrium) @ v) <= 1e-12


def test_tangent_space_isomerization_is_trivial(isomerization):
    assert tangent_space(isomerization, [1 / 3, 2 / 3]).shape == (2, 0)


def test_conserved_functionals_association(association_spec, association):
    functionals = conserved_functionals(association, association_spec)
    assert functionals.count == 2
    np.testing.assert_allclose(functionals.basis[0], np.array([1.0, 1.0, 2.0]) / np.sqrt(6.0))
    np.testing.assert_allclose(functionals.basis @ functionals.basis.T, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(functionals.basis @ association.nu, 0.0, atol=1e-12)

    values = np.tile([0.2, 0.3, 0.5], (4, 1))
    totals = functionals.evaluate(association_spec, values, 0.25)
    assert totals[0] == pytest.approx(1.0 / np.sqrt(6.0))


def test_conserved_functionals_without_reactions(association_spec):
    functionals = conserved_functionals(ReactionNetwork.empty(3), association_spec)
    assert functionals.count == 3
    np.testing.assert_allclose(functionals.basis[0], np.array([1.0, 1.0, 2.0]) / np.sqrt(6.0))
    np.testing.assert_allclose(functionals.basis @ functionals.basis.T, np.eye(3), atol=1e-12)


def test_conserved_functionals_isomerization(two_species, isomerization):
    functionals = conserved_functionals(isomerization, two_species)
    assert functionals.count == 1
    np.testing.assert_allclose(np.abs(functionals.basis[0]), np.full(2, 1 / np.sqrt(2.0)))
