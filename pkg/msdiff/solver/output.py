import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from msdiff.solver.grid import Field
from msdiff.solver.simulation import Diagnostics, SimulationResult


def format_float(value: float) -> str:
    return f"{value:.17g}"


def snapshot_name(time: float) -> str:
    return f"snap_{time:.6g}.csv"


def write_snapshot(path: Path, snapshot: Field) -> None:
    grid = snapshot.grid
    coordinate_names = ["x", "y"][: grid.dim]
    species_names = [f"y_{k + 1}" for k in range(snapshot.n_species)]
    centers = grid.centers.reshape(-1, grid.dim)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(coordinate_names + species_names)
        for point, values in zip(centers, snapshot.flat):
            writer.writerow([format_float(v) for v in (*point, *values)])


def diagnostics_header(n_functionals: int) -> list[str]:
    return [
        "t",
        "Psi",
        "min_y",
        "max_y",
        "sum_dev",
        "dt",
        *(f"q_{q + 1}" for q in range(n_functionals)),
        "dissipation",
    ]


def write_diagnostics(
    path: Path, diagnostics: Sequence[Diagnostics], n_functionals: int
) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(diagnostics_header(n_functionals))
        for record in diagnostics:
            writer.writerow([format_float(v) for v in record.row()])


def write_summary(path: Path, result: SimulationResult) -> None:
    with open(path, "w") as f:
        json.dump(result.summary(), f, indent=2)
        f.write("\n")


def write_snapshots(directory: Path, snapshots: Iterable[Field]) -> list[Path]:
    paths = []
    for snapshot in snapshots:
        path = directory / snapshot_name(snapshot.time)
        write_snapshot(path, snapshot)
        paths.append(path)
    return paths
