import csv
import json
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import solve_ivp

import msdiff.solver.scheme
from msdiff.errors import (
    DimensionMismatch,
    MassNotConserved,
    NonIntegrableConfig,
    NotInE,
    StepRejected,
)
from msdiff.kinetics import ReactionNetwork, source_term
from msdiff.mixture import MixtureSpec
from msdiff.scenario import load_scenario, parse_scenario
from msdiff.solver import (
    CosineMode,
    Field,
    GaussianBump,
    Grid,
    InitialCondition,
    SimConfig,
    Step,
    TwoBlob,
    Uniform,
    ZeroMask,
    face_flux,
    semidiscrete_rhs,
    simulate,
    stable_dt,
    step_rk4,
)
from msdiff.solver.output import (
    diagnostics_header,
    snapshot_name,
    write_diagnostics,
    write_snapshot,
    write_summary,
)
from msdiff.solver.scheme import flux_divergence, mass_leak
from msdiff.solver.simulation import _schedule


def _config(
    spec: MixtureSpec,
    cells: int,
    profile,
    t_end: float = 1.0,
    network: ReactionNetwork | None = None,
    length: float = 1.0,
    **kwargs,
) -> SimConfig:
    return SimConfig(
        spec, Grid((length,), (cells,)), InitialCondition(profile), t_end, network, **kwargs
    )


def test_grid_geometry():
    grid = Grid((1.0, 2.0), (4, 8))
    assert grid.dim == 2
    assert grid.spacing == (0.25, 0.25)
    assert grid.cell_volume == pytest.approx(0.0625)
    assert grid.face_areas == (0.25, 0.25)
    assert grid.n_cells == 32
    assert grid.total_volume == pytest.approx(grid.n_cells * grid.cell_volume)
    assert grid.centers.shape == (4, 8, 2)
    np.testing.assert_allclose(grid.centers[0, 0], [0.125, 0.125])
    with pytest.raises(DimensionMismatch):
        Grid((1.0, 1.0, 1.0), (2, 2, 2))
    with pytest.raises(ValueError):
        Grid((1.0,), (1,))


def test_face_flux(two_species):
    assert np.abs(face_flux(two_species, [0.3, 0.7], [0.3, 0.7], 0.1)).max() == 0.0
    np.testing.assert_allclose(face_flux(two_species, [0.4, 0.6], [0.6, 0.4], 0.1), [2.0, -2.0])


def test_two_cell_rhs(two_species):
    config = _config(two_species, 2, Uniform((0.5, 0.5)), length=0.2)
    field = Field(config.grid, np.array([[0.4, 0.6], [0.6, 0.4]]))
    np.testing.assert_allclose(
        semidiscrete_rhs(config, field), [[20.0, -20.0], [-20.0, 20.0]], atol=1e-12
    )


def test_rhs_vanishes_at_equilibrium(two_species, isomerization):
    config = _config(two_species, 8, Uniform((1 / 3, 2 / 3)), network=isomerization)
    rhs = semidiscrete_rhs(config, config.initial_field)
    assert np.abs(rhs).max() <= 1e-14
    stepped = step_rk4(config, config.initial_field, stable_dt(config, config.initial_field))
    np.testing.assert_allclose(stepped.values, config.initial_field.values, atol=1e-14)


def test_rhs_lies_in_E(association_spec, association):
    profile = GaussianBump((0.2, 0.3, 0.5), (0.6, 0.3, 0.1), (0.4,), 0.1)
    config = _config(association_spec, 16, profile, network=association)
    values = config.initial_field.values
    raw = flux_divergence(association_spec, config.grid, values)
    raw += source_term(association, association_spec, values)
    assert mass_leak(raw) <= 1e-13
    rhs = semidiscrete_rhs(config, config.initial_field)
    assert np.abs(rhs.sum(axis=-1)).max() <= 1e-12


def test_rhs_rejects_mass_leak(two_species, monkeypatch):
    config = _config(two_species, 8, Step((0.7, 0.3), (0.2, 0.8), 0.5))
    divergence = msdiff.solver.scheme.flux_divergence

    def leaking(leak: float):
        return lambda spec, grid, values: divergence(spec, grid, values) + [leak, 0.0]

    monkeypatch.setattr(msdiff.solver.scheme, "flux_divergence", leaking(1e-15))
    rhs = semidiscrete_rhs(config, config.initial_field)
    assert np.abs(rhs.sum(axis=-1)).max() <= 1e-13

    monkeypatch.setattr(msdiff.solver.scheme, "flux_divergence", leaking(1e-6))
    with pytest.raises(NotInE):
        semidiscrete_rhs(config, config.initial_field)


def test_stable_dt(two_species):
    config = _config(two_species, 10, Step((0.7, 0.3), (0.2, 0.8), 0.5))
    assert stable_dt(config, config.initial_field) == pytest.approx(2e-3)

    slow = MixtureSpec.from_upper_triangle([1.0, 1.0], [[2.0]], 1.0)
    config = _config(slow, 10, Step((0.7, 0.3), (0.2, 0.8), 0.5))
    assert stable_dt(config, config.initial_field) == pytest.approx(4e-3)

    config = _config(two_species, 20, Step((0.7, 0.3), (0.2, 0.8), 0.5))
    assert stable_dt(config, config.initial_field) == pytest.approx(5e-4)


def test_oversized_step_is_rejected(two_species):
    config = _config(two_species, 32, Step((0.99, 0.01), (0.01, 0.99), 0.5))
    field = config.initial_field
    dt = 10 * stable_dt(config, field)
    with pytest.raises(StepRejected) as info:
        for _ in range(5):
            field = step_rk4(config, field, dt)
    assert info.value.details["time"] > 0


def test_diffusion_decays_monotonically(two_species):
    config = _config(two_species, 64, CosineMode((0.5, 0.5), (0.01, -0.01), (1,)))
    field = config.initial_field
    mean = field.mean_composition()
    previous = np.abs(field.values - mean).max()
    for _ in range(20):
        field = step_rk4(config, field, stable_dt(config, field))
        deviation = np.abs(field.values - mean).max()
        assert deviation < previous
        previous = deviation


def test_sim_config_validation(two_species, association):
    with pytest.raises(NonIntegrableConfig):
        _config(two_species, 8, Uniform((0.5, 0.5)), cfl_safety=0.95)
    with pytest.raises(NonIntegrableConfig):
        _config(two_species, 8, Uniform((0.5, 0.5)), t_end=0.0)
    with pytest.raises(NonIntegrableConfig):
        _config(two_species, 8, Uniform((0.5, 0.5)), output_interval=-1.0)
    with pytest.raises(DimensionMismatch):
        _config(two_species, 8, Uniform((0.5, 0.5)), network=association)
    config = _config(two_species, 8, Uniform((0.5, 0.5)), t_end=2.0)
    assert config.output_step == pytest.approx(0.02)


def test_schedule_lands_on_outputs_and_snapshots():
    stops = _schedule(1.0, 0.3, [0.5, 1.0, 2.0])
    times = [t for t, _, _ in stops]
    np.testing.assert_allclose(times, [0.3, 0.5, 0.6, 0.9, 1.0])
    assert [(o, s) for _, o, s in stops] == [
        (True, False),
        (False, True),
        (True, False),
        (True, False),
        (True, True),
    ]
    assert stops[-1][0] == 1.0


def test_pure_diffusion_reaches_mean(two_species):
    config = _config(
        two_species, 8, Step((0.8, 0.2), (0.3, 0.7), 0.3), t_end=2.0, output_interval=0.5
    )
    mean = config.initial_field.mean_composition()
    result = simulate(config)
    assert result.final.time == 2.0
    assert np.abs(result.final.values - mean).max() <= 1e-6
    assert result.max_sum_deviation <= 1e-10


def test_uniform_reaction_matches_closed_form(two_species, isomerization):
    config = _config(
        two_species,
        4,
        Uniform((0.5, 0.5)),
        t_end=1.0,
        network=isomerization,
        output_interval=0.1,
    )
    result = simulate(config, keep_history=True)
    assert len(result.history) == 11
    for field in result.history:
        exact = 1 / 3 + (0.5 - 1 / 3) * np.exp(-3.0 * field.time)
        np.testing.assert_allclose(field.values[..., 0], exact, atol=1e-8)
        np.testing.assert_allclose(field.values[..., 1], 1.0 - exact, atol=1e-8)
    np.testing.assert_allclose(result.reference.y_star, [1 / 3, 2 / 3], atol=1e-12)


def test_reactive_run_invariants(association_spec, association):
    profile = Step((0.45, 0.35, 0.2), (0.25, 0.35, 0.4), 0.4)
    config = _config(
        association_spec, 16, profile, t_end=0.2, network=association, output_interval=0.02
    )
    result = simulate(config, snapshot_times=(0.0, 0.1))
    assert result.functionals.count == 2
    assert result.conservation_drifts.max() <= 1e-8
    assert result.free_energy_max_increase <= 1e-9
    assert result.max_sum_deviation <= 1e-10
    assert result.min_component > 0
    assert all(d.dissipation <= 1e-12 for d in result.diagnostics)
    assert [s.time for s in result.snapshots] == pytest.approx([0.0, 0.1])
    assert len(result.diagnostics) == 11

    summary = result.summary()
    assert summary["final_time"] == 0.2
    assert summary["max_conservation_drift"] <= 1e-8
    json.dumps(summary)


def test_positivity_from_half_zero_start(scenarios_dir: Path):
    config = load_scenario(scenarios_dir / "positivity_half_zero.yaml").sim_config()
    initial = config.initial_field
    left = config.grid.centers[..., 0] < 0.5
    assert np.all(initial.values[left, 0] == 0.0)
    result = simulate(config)
    assert result.final.time == pytest.approx(0.01)
    assert result.final.values[..., 0].min() > 0
    assert result.min_component >= 0


def test_two_dimensional_smoke(scenarios_dir: Path):
    scenario = load_scenario(scenarios_dir / "two_blob_2d.yaml")
    data = scenario.model_dump()
    data["grid"]["cells"] = [8, 8]
    data["run"]["t_end"] = 0.01
    data["run"]["output_interval"] = 0.005
    config = parse_scenario(data).sim_config()
    result = simulate(config)
    assert result.final.values.shape == (8, 8, 3)
    assert result.conservation_drifts.max() <= 1e-8
    assert result.max_sum_deviation <= 1e-10


def test_initial_profiles():
    grid = Grid((1.0,), (4,))
    step = Step((1.0, 0.0), (0.0, 1.0), 0.5).evaluate(grid)
    np.testing.assert_array_equal(step[:, 0], [1.0, 1.0, 0.0, 0.0])

    cosine = CosineMode((0.5, 0.5), (0.1, -0.1), (1,)).evaluate(grid)
    np.testing.assert_allclose(cosine[:, 0], 0.5 + 0.1 * np.cos(np.pi * grid.centers[:, 0]))
    with pytest.raises(NonIntegrableConfig):
        CosineMode((0.5, 0.5), (0.1, 0.1), (1,)).evaluate(grid)

    square = Grid((1.0, 1.0), (6, 6))
    blob = TwoBlob(
        (0.3, 0.3, 0.4), (0.6, 0.2, 0.2), (0.1, 0.5, 0.4), (0.3, 0.3), (0.7, 0.7), 0.2
    ).evaluate(square)
    np.testing.assert_allclose(blob.sum(axis=-1), 1.0)
    assert blob.min() >= 0

    with pytest.raises(DimensionMismatch):
        GaussianBump((0.5, 0.5), (0.9, 0.1), (0.5, 0.5), 0.1).evaluate(grid)
    with pytest.raises(NonIntegrableConfig):
        Uniform((0.6, 0.6)).evaluate(grid)


def test_initial_noise_and_masks():
    grid = Grid((1.0,), (10,))
    condition = InitialCondition(
        Uniform((0.2, 0.3, 0.5)), (ZeroMask(0, (0.0,), (0.5,)),), noise=0.1
    )
    field = condition.build(grid, 3, seed=3)
    np.testing.assert_allclose(field.values.sum(axis=-1), 1.0, atol=1e-14)
    assert np.all(field.values[:5, 0] == 0.0)
    assert np.all(field.values[5:, 0] > 0.0)
    np.testing.assert_array_equal(condition.build(grid, 3, seed=3).values, field.values)
    assert not np.array_equal(condition.build(grid, 3, seed=4).values, field.values)

    with pytest.raises(NonIntegrableConfig):
        InitialCondition(Uniform((0.5, 0.5)), noise=0.5)
    with pytest.raises(DimensionMismatch):
        InitialCondition(Uniform((0.5, 0.5))).build(grid, 3)
    emptied = InitialCondition(
        Uniform((1.0, 0.0)), (ZeroMask(0, (0.0,), (1.0,)),)
    )
    with pytest.raises(NonIntegrableConfig):
        emptied.build(grid, 2)


def test_field_validation():
    grid = Grid((1.0,), (2,))
    with pytest.raises(DimensionMismatch):
        Field(grid, np.full((3, 2), 0.5))
    field = Field(grid, np.array([[0.5, 0.5], [0.2, 0.8]]))
    assert field.validate() is field
    assert field.is_interior
    np.testing.assert_allclose(field.mean_composition(), [0.35, 0.65])


def test_output_writers(two_species, isomerization):
    config = _config(
        two_species,
        4,
        Step((0.7, 0.3), (0.2, 0.8), 0.5),
        t_end=0.05,
        network=isomerization,
        output_interval=0.01,
    )
    result = simulate(config, snapshot_times=(0.0, 0.05))

    assert snapshot_name(0.05) == "snap_0.05.csv"
    write_snapshot(Path(snapshot_name(0.05)), result.snapshots[-1])
    with open(snapshot_name(0.05), newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["x", "y_1", "y_2"]
    assert len(rows) == 5
    assert float(rows[1][0]) == pytest.approx(0.125)
    assert float(rows[1][1]) == result.final.values[0, 0]

    header = diagnostics_header(result.functionals.count)
    assert header == ["t", "Psi", "min_y", "max_y", "sum_dev", "dt", "q_1", "dissipation"]
    write_diagnostics(Path("diagnostics.csv"), result.diagnostics, result.functionals.count)
    with open("diagnostics.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == header
    assert len(rows) == 1 + len(result.diagnostics)
    assert float(rows[-1][0]) == pytest.approx(0.05)

    write_summary(Path("summary.json"), result)
    with open("summary.json") as f:
        summary = json.load(f)
    assert summary["steps"] == result.steps
    assert summary["reference_y_star"] == pytest.approx([1 / 3, 2 / 3])


def test_uniform_association_matches_ode_solution(association_spec, association):
    y0 = np.array([0.45, 0.35, 0.2])
    config = _config(
        association_spec,
        4,
        Uniform(tuple(y0)),
        t_end=0.5,
        network=association,
        output_interval=0.05,
    )
    result = simulate(config, keep_history=True)
    times = [field.time for field in result.history]
    oracle = solve_ivp(
        lambda _, y: source_term(association, association_spec, y) / association_spec.rho,
        (0.0, 0.5),
        y0,
        method="DOP853",
        t_eval=times,
        rtol=1e-12,
        atol=1e-14,
    )
    assert oracle.success
    for field, expected in zip(result.history, oracle.y.T):
        np.testing.assert_allclose(field.values, np.broadcast_to(expected, (4, 3)), atol=1e-8)


def test_regularized_source_hook(two_species, isomerization):
    eps = 0.25

    def regularized(y):
        return source_term(isomerization, two_species, y) + eps * (1.0 - 2.0 * y)

    config = _config(
        two_species, 4, Uniform((0.5, 0.5)), t_end=1.0, output_interval=0.1, source=regularized
    )
    result = simulate(config, keep_history=True)
    assert result.functionals.count == 1
    assert result.conservation_drifts.max() <= 1e-12
    # y1' = 1 - 3 y1 + eps (1 - 2 y1)
    rate = 3.0 + 2.0 * eps
    limit = (1.0 + eps) / rate
    for field in result.history:
        exact = limit + (0.5 - limit) * np.exp(-rate * field.time)
        np.testing.assert_allclose(field.values[..., 0], exact, atol=1e-8)
        np.testing.assert_allclose(field.values[..., 1], 1.0 - exact, atol=1e-8)


def test_source_hook_matches_network(two_species, isomerization):
    profile = Step((0.7, 0.3), (0.2, 0.8), 0.5)
    by_network = simulate(_config(two_species, 16, profile, t_end=0.05, network=isomerization))
    by_hook = simulate(
        _config(
            two_species,
            16,
            profile,
            t_end=0.05,
            source=lambda y: source_term(isomerization, two_species, y),
        )
    )
    np.testing.assert_allclose(by_hook.final.values, by_network.final.values, atol=1e-14)


def test_source_hook_validation(two_species, isomerization):
    uniform = Uniform((0.5, 0.5))
    with pytest.raises(MassNotConserved):
        _config(two_species, 8, uniform, source=lambda y: 0.1 * y)
    with pytest.raises(DimensionMismatch):
        _config(two_species, 8, uniform, source=lambda y: y[..., :1])
    with pytest.raises(NonIntegrableConfig):
        _config(two_species, 8, uniform, source=lambda y: np.full_like(y, np.nan))
    with pytest.raises(NonIntegrableConfig):
        _config(
            two_species, 8, uniform, network=isomerization, source=lambda y: np.zeros_like(y)
        )


def test_spatial_convergence_is_second_order():
    spec = MixtureSpec.from_upper_triangle([1.0, 3.0], [[2.0]], 1.0)
    profile = CosineMode((0.5, 0.5), (0.2, -0.2), (1,))

    def final(cells: int) -> np.ndarray:
        config = _config(spec, cells, profile, t_end=0.01, output_interval=0.01)
        return simulate(config).final.values

    reference = final(256)
    errors = []
    for cells in (16, 32, 64):
        averaged = reference.reshape(cells, 256 // cells, 2).mean(axis=1)
        errors.append(np.abs(final(cells) - averaged).max())
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert orders.min() >= 1.8


@pytest.mark.parametrize(
    "name",
    ["two_species_relax", "diffusion_first_mode", "pure_diffusion_three", "association_three"],
)
def test_shipped_scenarios_dissipate_and_conserve(scenarios_dir: Path, name: str):
    config = load_scenario(scenarios_dir / f"{name}.yaml").sim_config()
    assert config.grid.cells == (64,)
    result = simulate(config)
    assert result.free_energy_max_increase <= 1e-9
    assert result.conservation_drifts.max() <= 1e-8
    assert result.max_sum_deviation <= 1e-10
