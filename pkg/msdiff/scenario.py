"""Scenario documents: YAML files validated against pydantic models."""

from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import (
    AfterValidator,
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    ValidationError,
    model_validator,
)
from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from msdiff.errors import ConfigError
from msdiff.kinetics import ReactionNetwork
from msdiff.mixture import MixtureSpec
from msdiff.solver import (
    CosineMode,
    GaussianBump,
    Grid,
    InitialCondition,
    SimConfig,
    Step,
    TwoBlob,
    Uniform,
    ZeroMask,
)

COMPOSITION_SUM_TOL = 1e-9


def _normalized(values: list[float]) -> list[float]:
    total = sum(values)
    if abs(total - 1.0) > COMPOSITION_SUM_TOL:
        raise ValueError(f"mass fractions must sum to 1, got {total}")
    return [v / total for v in values]


CompositionField = Annotated[list[NonNegativeFloat], AfterValidator(_normalized)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MixtureModel(_Strict):
    n_species: int = Field(ge=2)
    masses: list[PositiveFloat]
    friction: list[list[PositiveFloat]] = Field(
        description="Upper triangle of the friction matrix, row i holds f_i,i+1 .. f_i,N"
    )
    rho: PositiveFloat = 1.0

    @model_validator(mode="after")
    def _check_shapes(self) -> "MixtureModel":
        n = self.n_species
        if len(self.masses) != n:
            raise ValueError(f"expected {n} masses, got {len(self.masses)}")
        lengths = [len(row) for row in self.friction]
        if lengths != list(range(n - 1, 0, -1)):
            raise ValueError(f"friction rows must have lengths {list(range(n - 1, 0, -1))}")
        return self


class ReactionModel(_Strict):
    nu_plus: list[NonNegativeInt]
    nu_minus: list[NonNegativeInt]
    k_plus: PositiveFloat
    k_minus: PositiveFloat


class GridModel(_Strict):
    dim: Literal[1, 2]
    lengths: list[PositiveFloat]
    cells: list[Annotated[int, Field(ge=2)]]

    @model_validator(mode="after")
    def _check_axes(self) -> "GridModel":
        if len(self.lengths) != self.dim or len(self.cells) != self.dim:
            raise ValueError(f"lengths and cells need {self.dim} entries")
        return self


class UniformParams(_Strict):
    composition: CompositionField


class StepParams(_Strict):
    left: CompositionField
    right: CompositionField
    position: float


class GaussianBumpParams(_Strict):
    background: CompositionField
    peak: CompositionField
    center: list[float]
    width: PositiveFloat


class TwoBlobParams(_Strict):
    background: CompositionField
    first: CompositionField
    second: CompositionField
    first_center: list[float]
    second_center: list[float]
    width: PositiveFloat


class CosineModeParams(_Strict):
    base: CompositionField
    amplitude: list[float]
    modes: list[NonNegativeInt]


ProfileParams = UniformParams | StepParams | GaussianBumpParams | TwoBlobParams | CosineModeParams

_PARAMS: dict[str, type[BaseModel]] = {
    "uniform": UniformParams,
    "step": StepParams,
    "gaussian-bump": GaussianBumpParams,
    "two-blob": TwoBlobParams,
    "cosine-mode": CosineModeParams,
}


class ZeroMaskModel(_Strict):
    component: int = Field(ge=1, description="1-based species index")
    lower: list[float]
    upper: list[float]


class InitialModel(_Strict):
    profile: Literal["uniform", "step", "gaussian-bump", "two-blob", "cosine-mode"]
    params: dict[str, Any]
    zero_masks: list[ZeroMaskModel] = []
    noise: float = Field(default=0.0, ge=0.0, lt=0.5)

    @model_validator(mode="after")
    def _check_params(self) -> "InitialModel":
        _PARAMS[self.profile].model_validate(self.params)
        return self

    @property
    def profile_params(self) -> ProfileParams:
        return _PARAMS[self.profile].model_validate(self.params)  # type: ignore[return-value]


class RunModel(_Strict):
    t_end: PositiveFloat
    cfl_safety: float = Field(default=0.4, gt=0.0, le=0.9)
    output_interval: PositiveFloat | None = None
    seed: NonNegativeInt = 0


class OutputsModel(_Strict):
    directory: str = "out"
    snapshot_times: list[NonNegativeFloat] = []


class ScenarioFile(_Strict):
    mixture: MixtureModel
    reactions: list[ReactionModel] = []
    grid: GridModel
    initial: InitialModel
    run: RunModel
    outputs: OutputsModel = OutputsModel()

    @model_validator(mode="after")
    def _check_species(self) -> "ScenarioFile":
        n = self.mixture.n_species
        for i, reaction in enumerate(self.reactions):
            if len(reaction.nu_plus) != n or len(reaction.nu_minus) != n:
                raise ValueError(f"reaction {i + 1} needs {n} stoichiometric coefficients")
        for mask in self.initial.zero_masks:
            if mask.component > n:
                raise ValueError(f"zero mask component {mask.component} exceeds {n} species")
            if len(mask.lower) != self.grid.dim or len(mask.upper) != self.grid.dim:
                raise ValueError(f"zero mask corners need {self.grid.dim} coordinates")
        return self

    def mixture_spec(self) -> MixtureSpec:
        return MixtureSpec.from_upper_triangle(
            self.mixture.masses, self.mixture.friction, self.mixture.rho
        )

    def network(self) -> ReactionNetwork | None:
        if not self.reactions:
            return None
        return ReactionNetwork.from_reactions(
            self.mixture.n_species,
            [(r.nu_plus, r.nu_minus, r.k_plus, r.k_minus) for r in self.reactions],
        )

    def grid_spec(self) -> Grid:
        return Grid(tuple(self.grid.lengths), tuple(self.grid.cells))

    def initial_condition(self) -> InitialCondition:
        params = self.initial.profile_params
        match params:
            case UniformParams():
                profile: Any = Uniform(tuple(params.composition))
            case StepParams():
                profile = Step(tuple(params.left), tuple(params.right), params.position)
            case GaussianBumpParams():
                profile = GaussianBump(
                    tuple(params.background),
                    tuple(params.peak),
                    tuple(params.center),
                    params.width,
                )
            case TwoBlobParams():
                profile = TwoBlob(
                    tuple(params.background),
                    tuple(params.first),
                    tuple(params.second),
                    tuple(params.first_center),
                    tuple(params.second_center),
                    params.width,
                )
            case CosineModeParams():
                profile = CosineMode(
                    tuple(params.base), tuple(params.amplitude), tuple(params.modes)
                )
        masks = tuple(
            ZeroMask(mask.component - 1, tuple(mask.lower), tuple(mask.upper))
            for mask in self.initial.zero_masks
        )
        return InitialCondition(profile, masks, self.initial.noise)

    def sim_config(self) -> SimConfig:
        return SimConfig(
            spec=self.mixture_spec(),
            grid=self.grid_spec(),
            initial=self.initial_condition(),
            t_end=self.run.t_end,
            network=self.network(),
            cfl_safety=self.run.cfl_safety,
            output_interval=self.run.output_interval,
            seed=self.run.seed,
        )


def _describe(error: ValidationError) -> list[str]:
    return [
        f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}"
        for err in error.errors()
    ]


def parse_scenario(data: Any, source: str = "<scenario>") -> ScenarioFile:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: scenario root must be a mapping")
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as e:
        raise ConfigError(
            f"{source}: {e.error_count()} validation error(s)", errors=_describe(e)
        ) from e


def load_scenario(path: Path) -> ScenarioFile:
    """Load and validate a YAML scenario document."""
    yaml = YAML(typ="safe")
    try:
        with Path(path).open("r", encoding="utf-8") as fh:
            data = yaml.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path}: {e.strerror}") from e
    except YAMLError as e:
        raise ConfigError(f"{path}: malformed YAML: {e}") from e
    return parse_scenario(data, str(path))


def mean_initial_composition(scenario: ScenarioFile) -> np.ndarray:
    """Volume-weighted mean of the scenario's initial field."""
    field = scenario.initial_condition().build(
        scenario.grid_spec(), scenario.mixture.n_species, scenario.run.seed
    )
    return field.mean_composition()
