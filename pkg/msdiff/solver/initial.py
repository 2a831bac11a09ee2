"""Initial-condition profiles evaluated on a grid."""

from dataclasses import dataclass
import logging
from typing import Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from msdiff.errors import DimensionMismatch, InadmissibleComposition, NonIntegrableConfig
from msdiff.mixture import E_TOL, Vector, classify
from msdiff.solver.grid import Field, Grid

logger = logging.getLogger(__name__)

MAX_NOISE = 0.5


def _composition(values: ArrayLike, name: str) -> Vector:
    vector = np.asarray(values, dtype=float)
    try:
        classify(vector)
    except InadmissibleComposition as e:
        raise NonIntegrableConfig(f"{name}: {e.message}", **e.details) from e
    return vector


def _point(values: ArrayLike, grid: Grid, name: str) -> NDArray[np.float64]:
    point = np.asarray(values, dtype=float)
    if point.shape != (grid.dim,):
        raise DimensionMismatch(f"{name} needs {grid.dim} coordinates, got {point.tolist()}")
    return point


class Profile(Protocol):
    def evaluate(self, grid: Grid) -> NDArray[np.float64]:
        """Mass fractions at the cell centers, shape ``grid.cells + (N,)``."""
        ...


@dataclass(frozen=True)
class Uniform:
    composition: tuple[float, ...]

    def evaluate(self, grid: Grid) -> NDArray[np.float64]:
        y = _composition(self.composition, "uniform composition")
        return np.broadcast_to(y, grid.cells + y.shape).copy()


@dataclass(frozen=True)
class Step:
    """``left`` for x_0 < position, ``right`` elsewhere."""

    left: tuple[float, ...]
    right: tuple[float, ...]
    position: float

    def evaluate(self, grid: Grid) -> NDArray[np.float64]:
        left = _composition(self.left, "step left state")
        right = _composition(self.right, "step right state")
        if left.shape != right.shape:
            raise DimensionMismatch("step states differ in length")
        mask = grid.centers[..., 0] < self.position
        return np.where(mask[..., None], left, right)


def _bump(grid: Grid, center: NDArray[np.float64], width: float) -> NDArray[np.float64]:
    distance = ((grid.centers - center) ** 2).sum(axis=-1)
    return np.exp(-distance / (2.0 * width**2))


@dataclass(frozen=True)
class GaussianBump:
    """Blend from ``background`` to ``peak`` with a gaussian weight."""

    background: tuple[float, ...]
    peak: tuple[float, ...]
    center: tuple[float, ...]
    width: float

    def evaluate(self, grid: Grid) -> NDArray[np.float64]:
        background = _composition(self.background, "bump background")
        peak = _composition(self.peak, "bump peak")
        weight = _bump(grid, _point(self.center, grid, "bump center"), self.width)[..., None]
        return (1.0 - weight) * background + weight * peak


@dataclass(frozen=True)
class TwoBlob:
    background: tuple[float, ...]
    first: tuple[float, ...]
    second: tuple[float, ...]
    first_center: tuple[float, ...]
    second_center: tuple[float, ...]
    width: float

    def evaluate(self, grid: Grid) -> NDArray[np.float64]:
        background = _composition(self.background, "blob background")
        first = _composition(self.first, "first blob")
        second = _composition(self.second, "second blob")
        w1 = _bump(grid, _point(self.first_center, grid, "first blob center"), self.width)
        w2 = _bump(grid, _point(self.second_center, grid, "second blob center"), self.width)
        # convex weights keep every cell on the simplex
        total = np.maximum(w1 + w2, 1.0)
        w1, w2 = (w1 / total)[..., None], (w2 / total)[..., None]
        return (1.0 - w1 - w2) * background + w1 * first + w2 * second


@dataclass(frozen=True)
class CosineMode:
    """base + amplitude * prod_a cos(k_a pi x_a / L_a), amplitude in E."""

    base: tuple[float, ...]
    amplitude: tuple[float, ...]
    modes: tuple[int, ...]

    def evaluate(self, grid: Grid) -> NDArray[np.float64]:
        base = _composition(self.base, "cosine base")
        amplitude = np.asarray(self.amplitude, dtype=float)
        if amplitude.shape != base.shape:
            raise DimensionMismatch("cosine amplitude and base differ in length")
        if abs(amplitude.sum()) > E_TOL:
            raise NonIntegrableConfig(
                "cosine amplitude must sum to zero", amplitude_sum=float(amplitude.sum())
            )
        if len(self.modes) != grid.dim:
            raise DimensionMismatch(f"cosine mode needs {grid.dim} wave numbers")
        shape = np.ones(grid.cells)
        for axis, (k, length) in enumerate(zip(self.modes, grid.extents)):
            shape = shape * np.cos(k * np.pi * grid.centers[..., axis] / length)
        return base + shape[..., None] * amplitude


@dataclass(frozen=True)
class ZeroMask:
    """Sets ``component`` (0-based) to zero inside the box [lower, upper)."""

    component: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def apply(self, grid: Grid, values: NDArray[np.float64]) -> None:
        if not 0 <= self.component < values.shape[-1]:
            raise DimensionMismatch(f"zero mask component {self.component} out of range")
        lower = _point(self.lower, grid, "zero mask lower corner")
        upper = _point(self.upper, grid, "zero mask upper corner")
        inside = np.all((grid.centers >= lower) & (grid.centers < upper), axis=-1)
        values[inside, self.component] = 0.0


@dataclass(frozen=True)
class InitialCondition:
    profile: Profile
    zero_masks: tuple[ZeroMask, ...] = ()
    noise: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise < MAX_NOISE:
            raise NonIntegrableConfig(f"noise must lie in [0, {MAX_NOISE}), got {self.noise}")

    def build(self, grid: Grid, n_species: int, seed: int = 0) -> Field:
        values = np.array(self.profile.evaluate(grid), dtype=float)
        if values.shape[-1] != n_species:
            raise DimensionMismatch(
                f"initial profile has {values.shape[-1]} components, mixture has {n_species}"
            )
        for mask in self.zero_masks:
            mask.apply(grid, values)
        if self.noise:
            values = _perturb(values, self.noise, seed)
        totals = values.sum(axis=-1, keepdims=True)
        if np.any(totals <= 0):
            raise NonIntegrableConfig("zero masks removed every component of a cell")
        values = values / totals
        try:
            return Field(grid, values, 0.0).validate()
        except InadmissibleComposition as e:
            raise NonIntegrableConfig(f"initial field is inadmissible: {e.message}") from e


def _perturb(values: NDArray[np.float64], noise: float, seed: int) -> NDArray[np.float64]:
    """Multiplicative noise y_k (1 + noise (xi_k - (y|xi))); keeps zeros and the sum."""
    rng = np.random.default_rng(seed)
    xi = rng.uniform(-1.0, 1.0, size=values.shape)
    shift = (values * xi).sum(axis=-1, keepdims=True)
    logger.debug("perturbing initial field with noise %.3g (seed %d)", noise, seed)
    return values * (1.0 + noise * (xi - shift))


PROFILES: dict[str, type] = {
    "uniform": Uniform,
    "step": Step,
    "gaussian-bump": GaussianBump,
    "two-blob": TwoBlob,
    "cosine-mode": CosineMode,
}

__all__ = [
    "PROFILES",
    "CosineMode",
    "GaussianBump",
    "InitialCondition",
    "Profile",
    "Step",
    "TwoBlob",
    "Uniform",
    "ZeroMask",
]
