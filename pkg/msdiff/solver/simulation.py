from dataclasses import dataclass, field
from functools import cached_property
import logging
import math
from typing import Any, Iterable

import numpy as np
from tqdm import tqdm

from msdiff.equilibria import (
    ConservedFunctionals,
    conserved_functionals,
    find_equilibrium,
    total_mass_functional,
)
from msdiff.errors import DimensionMismatch, MassNotConserved, NonIntegrableConfig
from msdiff.kinetics import (
    ReactionNetwork,
    ReferenceEquilibrium,
    concentrations,
    free_energy_density,
    validate_network,
)
from msdiff.mixture import MixtureSpec, Vector
from msdiff.solver.grid import Field, Grid
from msdiff.solver.initial import InitialCondition
from msdiff.solver.scheme import (
    LEAK_TOL,
    SourceHook,
    dissipation_rates,
    mass_leak,
    stable_dt,
    step_rk4,
)

logger = logging.getLogger(__name__)

MAX_CFL_SAFETY = 0.9
DEFAULT_OUTPUTS = 100


@dataclass(frozen=True, eq=False)
class SimConfig:
    spec: MixtureSpec
    grid: Grid
    initial: InitialCondition
    t_end: float
    network: ReactionNetwork | None = None
    reference: ReferenceEquilibrium | None = None
    cfl_safety: float = 0.4
    output_interval: float | None = None
    seed: int = 0
    source: SourceHook | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise NonIntegrableConfig(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl_safety <= MAX_CFL_SAFETY:
            raise NonIntegrableConfig(
                f"cfl_safety must lie in (0, {MAX_CFL_SAFETY}], got {self.cfl_safety}"
            )
        if self.output_interval is not None and not self.output_interval > 0:
            raise NonIntegrableConfig(
                f"output_interval must be positive, got {self.output_interval}"
            )
        if self.network is not None:
            if self.network.n_species != self.spec.n_species:
                raise DimensionMismatch(
                    f"network has {self.network.n_species} species, "
                    f"mixture has {self.spec.n_species}"
                )
            validate_network(self.network, self.spec).raise_for_problems()
        if self.source is not None:
            if self.network is not None and self.network.m:
                raise NonIntegrableConfig("reaction network and source are exclusive")
            self._check_source(self.source)

    def _check_source(self, source: SourceHook) -> None:
        values = self.initial_field.values
        produced = np.asarray(source(values), dtype=float)
        if produced.shape != values.shape:
            raise DimensionMismatch(
                f"source returned shape {produced.shape}, expected {values.shape}"
            )
        if not np.all(np.isfinite(produced)):
            raise NonIntegrableConfig("source returned non-finite values")
        leak = mass_leak(produced)
        if leak > LEAK_TOL * self.spec.n_species:
            raise MassNotConserved(
                f"source does not preserve mass (relative leak {leak:.3e})", leak=leak
            )

    @property
    def output_step(self) -> float:
        if self.output_interval is None:
            return self.t_end / DEFAULT_OUTPUTS
        return self.output_interval

    @property
    def reaction_network(self) -> ReactionNetwork:
        return self.network if self.network is not None else ReactionNetwork.empty(
            self.spec.n_species
        )

    def conserved(self) -> ConservedFunctionals:
        """Functionals preserved by the dynamics; only total mass under a source hook."""
        if self.source is not None:
            return total_mass_functional(self.spec)
        return conserved_functionals(self.reaction_network, self.spec)

    @cached_property
    def initial_field(self) -> Field:
        return self.initial.build(self.grid, self.spec.n_species, self.seed)

    @cached_property
    def reference_state(self) -> ReferenceEquilibrium:
        """Equilibrium entering psi and mu."""
        if self.reference is not None:
            return self.reference
        net = self.reaction_network
        if net.m:
            mean = self.initial_field.mean_composition()
            init = mean if np.all(mean > 0) else None
            return find_equilibrium(net, self.spec, init).reference()
        n = self.spec.n_species
        return ReferenceEquilibrium.from_composition(self.spec, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class Diagnostics:
    time: float
    free_energy: float
    min_component: float
    max_component: float
    sum_deviation: float
    conserved_values: tuple[float, ...]
    step_size: float
    dissipation: float

    def row(self) -> tuple[float, ...]:
        return (
            self.time,
            self.free_energy,
            self.min_component,
            self.max_component,
            self.sum_deviation,
            self.step_size,
            *self.conserved_values,
            self.dissipation,
        )


@dataclass(eq=False)
class SimulationResult:
    diagnostics: list[Diagnostics]
    final: Field
    reference: ReferenceEquilibrium
    functionals: ConservedFunctionals
    drift_scale: Vector
    snapshots: list[Field] = field(default_factory=list)
    history: list[Field] = field(default_factory=list)
    steps: int = 0
    max_sum_deviation: float = 0.0
    min_component: float = math.inf

    @property
    def conservation_drifts(self) -> Vector:
        values = np.array([d.conserved_values for d in self.diagnostics])
        return np.abs(values - values[0]).max(axis=0) / self.drift_scale

    @property
    def free_energy_max_increase(self) -> float:
        psi = np.array([d.free_energy for d in self.diagnostics])
        if psi.size < 2:
            return 0.0
        increments = np.diff(psi)
        increments = increments[np.isfinite(increments)]
        return float(increments.max()) if increments.size else float("nan")

    def summary(self) -> dict[str, Any]:
        drifts = self.conservation_drifts
        return {
            "final_time": self.final.time,
            "steps": self.steps,
            "initial_free_energy": _json_float(self.diagnostics[0].free_energy),
            "final_free_energy": _json_float(self.diagnostics[-1].free_energy),
            "free_energy_max_increase": _json_float(self.free_energy_max_increase),
            "conservation_drifts": [float(d) for d in drifts],
            "max_conservation_drift": float(drifts.max()) if drifts.size else 0.0,
            "max_sum_deviation": self.max_sum_deviation,
            "min_component": self.min_component,
            "final_min_component": self.final.min_component,
            "reference_y_star": self.reference.y_star.tolist(),
        }


def _json_float(value: float) -> float | None:
    return value if math.isfinite(value) else None


def _schedule(
    t_end: float, interval: float, snapshot_times: Iterable[float]
) -> list[tuple[float, bool, bool]]:
    """Sorted stop times with (is_output, is_snapshot) flags."""
    tol = 1e-12 * max(1.0, t_end)
    count = int(math.floor(t_end / interval + 1e-9))
    outputs = [k * interval for k in range(1, count + 1)]
    if not outputs or not math.isclose(outputs[-1], t_end, abs_tol=tol):
        outputs.append(t_end)
    outputs[-1] = t_end
    stops: dict[float, list[bool]] = {t: [True, False] for t in outputs}
    for s in snapshot_times:
        if not 0 < s <= t_end + tol:
            continue
        match = next((t for t in stops if math.isclose(t, s, abs_tol=tol)), None)
        if match is None:
            stops[s] = [False, True]
        else:
            stops[match][1] = True
    return [(t, flags[0], flags[1]) for t, flags in sorted(stops.items())]


def _record(
    config: SimConfig, functionals: ConservedFunctionals, current: Field, dt: float
) -> Diagnostics:
    spec, grid = config.spec, config.grid
    psi = grid.cell_volume * float(
        np.sum(free_energy_density(spec, config.reference_state, current.values))
    )
    diffusive, reactive = dissipation_rates(config, current)
    return Diagnostics(
        time=current.time,
        free_energy=psi,
        min_component=current.min_component,
        max_component=current.max_component,
        sum_deviation=current.sum_deviation,
        conserved_values=tuple(
            float(v) for v in functionals.evaluate(spec, current.values, grid.cell_volume)
        ),
        step_size=dt,
        dissipation=diffusive + reactive,
    )


def simulate(
    config: SimConfig,
    *,
    snapshot_times: Iterable[float] = (),
    keep_history: bool = False,
    progress: bool = False,
) -> SimulationResult:
    """Integrate to ``config.t_end`` with dt = stable_dt, recording diagnostics.

    Steps are shortened to land exactly on output and snapshot times.
    ``keep_history`` additionally stores the field at every output time.
    """
    snapshot_times = tuple(snapshot_times)
    current = config.initial_field
    functionals = config.conserved()
    total = config.grid.cell_volume * concentrations(config.spec, current.flat).sum()
    initial = _record(config, functionals, current, 0.0)
    drift_scale = np.maximum(np.abs(np.array(initial.conserved_values)), total)

    result = SimulationResult(
        diagnostics=[initial],
        final=current,
        reference=config.reference_state,
        functionals=functionals,
        drift_scale=drift_scale,
        max_sum_deviation=current.sum_deviation,
        min_component=current.min_component,
    )
    if any(s == 0 for s in snapshot_times):
        result.snapshots.append(current)
    if keep_history:
        result.history.append(current)

    dt = 0.0
    schedule = _schedule(config.t_end, config.output_step, snapshot_times)
    with tqdm(
        total=config.t_end, unit="t", desc="simulate", disable=None if progress else True
    ) as bar:
        for stop, is_output, is_snapshot in schedule:
            while current.time < stop:
                dt = stable_dt(config, current)
                remaining = stop - current.time
                landing = dt >= remaining
                if landing:
                    dt = remaining
                current = step_rk4(config, current, dt)
                if landing:
                    current = current.evolve(current.values, stop)
                result.steps += 1
                result.max_sum_deviation = max(result.max_sum_deviation, current.sum_deviation)
                result.min_component = min(result.min_component, current.min_component)
                bar.update(dt)
            if is_output:
                result.diagnostics.append(_record(config, functionals, current, dt))
                if keep_history:
                    result.history.append(current)
            if is_snapshot:
                result.snapshots.append(current)

    result.final = current
    logger.info(
        "reached t=%.6g after %d steps, free energy %.6g",
        current.time,
        result.steps,
        result.diagnostics[-1].free_energy,
    )
    return result
