from argparse import ArgumentParser, Namespace
from pathlib import Path

from msdiff.commands.defaults import DEFAULTS
from msdiff.scenario import load_scenario
from msdiff.solver import simulate
from msdiff.solver.output import write_diagnostics, write_snapshots, write_summary
from msdiff.timing.time_tracker import TimeTracker


def init_parser_simulate(parser: ArgumentParser):
    parser.add_argument("scenario", type=Path, help="Path to the YAML scenario file")
    parser.add_argument(
        "--output",
        type=Path,
        default=None,
        help="Directory for diagnostics, snapshots and summary. Overrides outputs.directory",
    )
    parser.add_argument(
        "--progress", action="store_true", help="Show a progress bar while integrating"
    )
    parser.set_defaults(func=simulate_command, timing=True)


def simulate_command(args: Namespace, time_tracker: TimeTracker) -> int:
    with time_tracker.task("setup"):
        scenario = load_scenario(args.scenario)
        config = scenario.sim_config()
        output_dir: Path = args.output or Path(scenario.outputs.directory)
        output_dir.mkdir(parents=True, exist_ok=True)
        time_tracker.csv_path = output_dir / DEFAULTS.TIMINGS_PATH
        # surface initial-field and equilibrium errors before integrating
        config.initial_field
        config.reference_state

    with time_tracker.task("integrate"):
        result = simulate(
            config,
            snapshot_times=scenario.outputs.snapshot_times,
            progress=args.progress,
        )

    with time_tracker.task("write"):
        write_diagnostics(
            output_dir / DEFAULTS.DIAGNOSTICS_PATH,
            result.diagnostics,
            result.functionals.count,
        )
        write_snapshots(output_dir, result.snapshots)
        write_summary(output_dir / DEFAULTS.SUMMARY_PATH, result)

    print(f"Wrote {len(result.diagnostics)} diagnostics records to {output_dir}")
    return 0
