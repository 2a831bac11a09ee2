from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from msdiff.errors import DimensionMismatch, InadmissibleComposition
from msdiff.mixture import BOUNDARY_TOL, Vector

FIELD_SUM_TOL = 1e-11


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product box grid with cell-centered unknowns."""

    extents: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "extents", tuple(float(x) for x in self.extents))
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        if len(self.extents) not in (1, 2) or len(self.cells) != len(self.extents):
            raise DimensionMismatch(
                f"grid needs 1 or 2 axes, got extents {self.extents} and cells {self.cells}"
            )
        if any(n < 2 for n in self.cells):
            raise ValueError(f"every axis needs at least 2 cells, got {self.cells}")
        if any(not (length > 0 and np.isfinite(length)) for length in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.extents, self.cells))

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def face_areas(self) -> tuple[float, ...]:
        """Area of the faces normal to each axis."""
        return tuple(self.cell_volume / h for h in self.spacing)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def total_volume(self) -> float:
        return float(np.prod(self.extents))

    @cached_property
    def centers(self) -> NDArray[np.float64]:
        """Cell centers, shape ``cells + (dim,)``."""
        axes = [
            (np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)
        ]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass(frozen=True, eq=False)
class Field:
    """Mass fractions on a grid, shape ``grid.cells + (N,)``."""

    grid: Grid
    values: NDArray[np.float64]
    time: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != self.grid.dim + 1 or values.shape[:-1] != self.grid.cells:
            raise DimensionMismatch(
                f"field shape {values.shape} does not match grid cells {self.grid.cells}"
            )
        object.__setattr__(self, "values", values)

    @property
    def n_species(self) -> int:
        return self.values.shape[-1]

    @property
    def flat(self) -> NDArray[np.float64]:
        return self.values.reshape(-1, self.n_species)

    @property
    def min_component(self) -> float:
        return float(self.values.min())

    @property
    def max_component(self) -> float:
        return float(self.values.max())

    @property
    def sum_deviation(self) -> float:
        return float(np.abs(self.values.sum(axis=-1) - 1.0).max())

    @property
    def is_interior(self) -> bool:
        return self.min_component > 0

    def mean_composition(self) -> Vector:
        # uniform cells: the volume-weighted mean is the plain mean
        return self.flat.mean(axis=0)

    def validate(self) -> "Field":
        if not np.all(np.isfinite(self.values)):
            raise InadmissibleComposition("field contains non-finite values")
        if self.sum_deviation > FIELD_SUM_TOL:
            raise InadmissibleComposition(
                f"mass fractions deviate from 1 by {self.sum_deviation:.3e}",
                sum_deviation=self.sum_deviation,
            )
        if self.min_component < -BOUNDARY_TOL:
            raise InadmissibleComposition(
                f"field has component {self.min_component:.3e} below -{BOUNDARY_TOL:g}",
                min_component=self.min_component,
            )
        return self

    def evolve(self, values: NDArray[np.float64], time: float) -> "Field":
        return Field(self.grid, values, time)
