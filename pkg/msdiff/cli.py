"""CLI interface for msdiff."""

from argparse import ArgumentParser
from importlib.metadata import PackageNotFoundError, version
import json
import logging
from os import cpu_count, environ
import sys
from typing import NoReturn, Sequence

from pydantic import ValidationError

from msdiff.commands.defaults import DEFAULTS
from msdiff.commands.equilibrium import init_parser_equilibrium
from msdiff.commands.simulate import init_parser_simulate
from msdiff.commands.spectrum import init_parser_spectrum
from msdiff.commands.verify import init_parser_verify
from msdiff.errors import (
    ConfigError,
    DimensionMismatch,
    InadmissibleComposition,
    MassNotConserved,
    MsdiffError,
    NoEquilibrium,
    NonInteriorComposition,
    NonIntegrableConfig,
)
from msdiff.timing.time_tracker import TimeTracker

logger = logging.getLogger(__name__)

CONFIG_ERRORS = (
    ConfigError,
    NonIntegrableConfig,
    MassNotConserved,
    DimensionMismatch,
    InadmissibleComposition,
    NonInteriorComposition,
)


class MsdiffArgumentParser(ArgumentParser):
    """Argument errors exit with the configuration exit code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        report_error(ConfigError(message))
        self.exit(1)


def report_error(error: MsdiffError) -> None:
    print("ERROR " + json.dumps(error.as_dict(), default=str), file=sys.stderr)


def exit_code(error: MsdiffError) -> int:
    if isinstance(error, CONFIG_ERRORS):
        return 1
    if isinstance(error, NoEquilibrium):
        return 3
    return 2


def _version() -> str:
    try:
        return version("msdiff")
    except PackageNotFoundError:
        return "unknown"


def build_parser() -> ArgumentParser:
    parser = MsdiffArgumentParser(
        prog="msdiff",
        description="Simulate and analyze Maxwell-Stefan reaction-diffusion systems",
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + _version())
    parser.add_argument(
        "--max-workers",
        type=int,
        default=default_workers(),
        help=f"Maximum number of worker threads. Capped by ${DEFAULTS.THREADS_ENV}",
    )
    parser.add_argument(
        "--log-level",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        default=DEFAULTS.LOG_LEVEL,
        help=f"Logging threshold for messages on stderr. Defaults to {DEFAULTS.LOG_LEVEL}",
    )
    parser.set_defaults(timing=False)

    subparsers = parser.add_subparsers(required=True, title="Commands")

    parser_simulate = subparsers.add_parser(
        "simulate", help="Integrate a scenario and write diagnostics"
    )
    init_parser_simulate(parser_simulate)

    parser_equilibrium = subparsers.add_parser(
        "equilibrium", help="Compute the chemical equilibrium of a scenario"
    )
    init_parser_equilibrium(parser_equilibrium)

    parser_spectrum = subparsers.add_parser(
        "spectrum", help="Linear stability spectrum at the scenario's equilibrium"
    )
    init_parser_spectrum(parser_spectrum)

    parser_verify = subparsers.add_parser(
        "verify", help="Run the randomized structural property battery"
    )
    init_parser_verify(parser_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0

    logging.basicConfig(
        level=args.log_level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.captureWarnings(True)
    args.max_workers = capped_workers(args.max_workers)

    try:
        if args.timing:
            with TimeTracker(None, "msdiff") as time_tracker:
                with time_tracker.task():
                    return args.func(args, time_tracker)
        return args.func(args)
    except MsdiffError as e:
        logger.debug("command failed", exc_info=True)
        report_error(e)
        return exit_code(e)
    except ValidationError as e:
        report_error(ConfigError(str(e)))
        return 1
    except ValueError as e:
        report_error(ConfigError(str(e)))
        return 1


def default_workers() -> int:
    if not (cpus := cpu_count()):
        return 12
    return min(32, cpus + 4)


def capped_workers(requested: int) -> int:
    workers = max(1, requested)
    if cap := environ.get(DEFAULTS.THREADS_ENV):
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", DEFAULTS.THREADS_ENV, cap)
    return workers
