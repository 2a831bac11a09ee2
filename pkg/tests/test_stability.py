import numpy as np
import pytest
import scipy.linalg

from msdiff.equilibria import find_equilibrium, tangent_space
from msdiff.errors import ConfigError, InsufficientDecay, NotAnEquilibrium
from msdiff.kinetics import ReactionNetwork, source_term
from msdiff.mixture import flux_matrix_A0, spectrum_on_E
from msdiff.solver import CosineMode, Grid, InitialCondition, SimConfig, Uniform, simulate
from msdiff.stability import (
    decay_rate_estimate,
    eigenpairs,
    laplace_modes,
    mode_matrix,
    reaction_jacobian,
    spectral_identity_residual,
    spectrum_report,
)

Y_STAR = np.array([1 / 3, 2 / 3])


def test_reaction_jacobian_two_species(two_species, isomerization):
    np.testing.assert_allclose(
        reaction_jacobian(isomerization, two_species, Y_STAR),
        -np.array([[2.0, -1.0], [-2.0, 1.0]]),
        atol=1e-14,
    )
    empty = ReactionNetwork.empty(2)
    np.testing.assert_array_equal(reaction_jacobian(empty, two_species, [0.5, 0.5]), 0.0)
    with pytest.raises(NotAnEquilibrium):
        reaction_jacobian(isomerization, two_species, [0.5, 0.5])


def test_reaction_jacobian_matches_finite_differences(
    association_spec, association, association_equilibrium
):
    exact = reaction_jacobian(association, association_spec, association_equilibrium)
    np.testing.assert_allclose(exact.sum(axis=0), 0.0, atol=1e-14)
    step = 1e-7
    approx = np.zeros((3, 3))
    for j in range(3):
        unit = np.eye(3)[j] * step * association_equilibrium[j]
        approx[:, j] = (
            source_term(association, association_spec, association_equilibrium + unit)
            - source_term(association, association_spec, association_equilibrium - unit)
        ) / (2 * unit[j])
    assert np.abs(exact - approx).max() <= 1e-5 * np.abs(exact).max()


def test_mode_matrix_two_species(two_species, isomerization):
    np.testing.assert_allclose(
        spectrum_on_E(mode_matrix(two_species, isomerization, Y_STAR, 0.0)), [3.0]
    )
    np.testing.assert_allclose(
        spectrum_on_E(mode_matrix(two_species, isomerization, Y_STAR, np.pi**2)),
        [np.pi**2 + 3.0],
    )
    with pytest.raises(ValueError):
        mode_matrix(two_species, isomerization, Y_STAR, -1.0)


def test_mode_matrix_association(association_spec, association, association_equilibrium):
    matrix = mode_matrix(association_spec, association, association_equilibrium, 0.0)
    values = np.sort(spectrum_on_E(matrix).real)
    assert abs(values[0]) <= 1e-12
    assert values[1] > 0


def test_spectrum_report_two_species(two_species, isomerization):
    report = spectrum_report(two_species, isomerization, Y_STAR, [1.0], k_max=8)
    assert report.kernel_dim_mode0 == 0
    assert report.semisimple
    assert report.spectral_gap == pytest.approx(3.0)
    assert report.decay_rate(2.0) == pytest.approx(1.5)
    assert len(report.modes) == 9
    np.testing.assert_allclose(report.mode_eigenvalues[(1,)], [np.pi**2 + 3.0])

    data = report.as_dict()
    assert set(data) == {"modes", "kernel_dim", "semisimple", "gap", "modes_used"}
    assert data["modes"][0]["eigenvalues"] == [[pytest.approx(3.0), 0.0]]


def test_spectrum_report_association(association_spec, association, association_equilibrium):
    report = spectrum_report(
        association_spec, association, association_equilibrium, [1.0], max_workers=4
    )
    assert report.kernel_dim_mode0 == 1
    assert report.semisimple
    assert report.spectral_gap > 0
    tangent = tangent_space(association, association_equilibrium)
    assert scipy.linalg.subspace_angles(report.kernel_basis, tangent).max() <= 1e-8
    eigenvalues = np.concatenate([m.eigenvalues for m in report.modes])
    assert eigenvalues.real.min() >= -1e-10
    assert np.count_nonzero(np.abs(eigenvalues) < 1e-10) == 1


def test_spectrum_report_pure_diffusion(association_spec):
    y = np.array([0.2, 0.3, 0.5])
    report = spectrum_report(association_spec, ReactionNetwork.empty(3), y, [1.0])
    assert report.kernel_dim_mode0 == 2
    assert report.semisimple
    a0 = spectrum_on_E(flux_matrix_A0(association_spec, y)).real
    assert report.spectral_gap == pytest.approx(np.pi**2 * a0.min(), rel=1e-10)


def test_spectrum_report_requires_enough_modes(two_species, isomerization):
    with pytest.raises(ConfigError):
        spectrum_report(two_species, isomerization, Y_STAR, [1.0], k_max=4)


def test_laplace_modes():
    modes = laplace_modes([1.0, 2.0], 8)
    assert len(modes) == 81
    assert modes[0] == ((0, 0), 0.0)
    lambdas = dict(modes)
    assert lambdas[(0, 1)] == pytest.approx((np.pi / 2) ** 2)
    assert lambdas[(2, 2)] == pytest.approx(4 * np.pi**2 + np.pi**2)


def test_spectral_identity(association_spec, association):
    y_star = find_equilibrium(association, association_spec, [0.5, 0.2, 0.3]).y_star.y
    for lam in (0.0, np.pi**2, 4 * np.pi**2):
        values, vectors = eigenpairs(mode_matrix(association_spec, association, y_star, lam))
        for value, vector in zip(values, vectors.T):
            if abs(value) < 1e-10:
                continue
            residual = spectral_identity_residual(
                association_spec, association, y_star, lam, value, vector
            )
            assert residual <= 1e-8


def _uniform_config(spec, network, composition, t_end, cells=4, profile=None) -> SimConfig:
    return SimConfig(
        spec,
        Grid((1.0,), (cells,)),
        InitialCondition(profile or Uniform(composition)),
        t_end,
        network,
        output_interval=0.02,
    )


def test_decay_rate_pure_diffusion(two_species):
    profile = CosineMode((0.5, 0.5), (0.01, -0.01), (1,))
    config = _uniform_config(two_species, None, None, 0.6, cells=32, profile=profile)
    result = simulate(config, keep_history=True)
    fit = decay_rate_estimate(result.history, y_star=[0.5, 0.5])
    assert fit.rate == pytest.approx(np.pi**2, rel=0.1)
    assert fit.r_squared > 0.99
    report = spectrum_report(two_species, ReactionNetwork.empty(2), [0.5, 0.5], [1.0])
    assert fit.rate == pytest.approx(report.decay_rate(two_species.rho), rel=0.15)


def test_decay_rate_reaction(two_species, isomerization):
    config = _uniform_config(two_species, isomerization, (0.5, 0.5), 2.0)
    result = simulate(config, keep_history=True)
    fit = decay_rate_estimate(result.history, y_star=Y_STAR)
    assert fit.rate == pytest.approx(3.0, rel=0.1)
    assert fit.window[0] == 0.0


def test_decay_rate_from_free_energy(two_species, isomerization):
    config = _uniform_config(two_species, isomerization, (0.5, 0.5), 4.0)
    result = simulate(config)
    fit = decay_rate_estimate(result.diagnostics)
    assert fit.rate == pytest.approx(3.0, rel=0.1)


def test_decay_rate_needs_decay(two_species, isomerization):
    config = _uniform_config(two_species, isomerization, (1 / 3, 2 / 3), 0.2)
    result = simulate(config, keep_history=True)
    with pytest.raises(InsufficientDecay):
        decay_rate_estimate(result.history, y_star=Y_STAR)
    with pytest.raises(InsufficientDecay):
        decay_rate_estimate(result.history[:2])
