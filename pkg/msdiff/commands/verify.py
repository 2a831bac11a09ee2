from argparse import ArgumentParser, Namespace
import argparse
import json
import sys

from msdiff.commands.defaults import DEFAULTS
from msdiff.properties import run_battery

PROPERTY_FAILURE = 4


def species_range_type(input: str) -> range:
    try:
        if ".." in input:
            start, end = (int(part) for part in input.split("..", 1))
        else:
            start = end = int(input)
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f'Invalid species range "{input}". Expected {{start}}..{{inclusiveEnd}}'
        ) from e
    if start < 2 or start > end:
        raise argparse.ArgumentTypeError(
            f'Invalid species range "{input}": need 2 <= start <= end'
        )
    return range(start, end + 1)


def positive_int_type(input: str) -> int:
    try:
        value = int(input)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f'"{input}" is not an integer') from e
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def init_parser_verify(parser: ArgumentParser):
    parser.add_argument(
        "--n-species",
        type=species_range_type,
        default=species_range_type(DEFAULTS.N_SPECIES),
        help=f"Species counts to test, e.g. 2..8. Defaults to {DEFAULTS.N_SPECIES}",
    )
    parser.add_argument(
        "--trials",
        type=positive_int_type,
        default=DEFAULTS.TRIALS,
        help=f"Random samples per species count. Defaults to {DEFAULTS.TRIALS}",
    )
    parser.add_argument(
        "--seed", type=int, default=DEFAULTS.SEED, help=f"Defaults to {DEFAULTS.SEED}"
    )
    parser.add_argument(
        "--progress", action="store_true", help="Show a progress bar per species count"
    )
    parser.set_defaults(func=verify_command, timing=False)


def verify_command(args: Namespace) -> int:
    report = run_battery(
        args.n_species, args.trials, args.seed, args.max_workers, args.progress
    )
    for name, outcome in report.outcomes.items():
        worst = f"{outcome.worst:.3e}" if outcome.passed + outcome.failed else "-"
        print(
            f"{name:<22} passed {outcome.passed:>7} failed {outcome.failed:>5} worst {worst}"
        )
    if report.ok:
        return 0
    details = {
        "error": "PropertyFailure",
        "message": f"failing properties: {', '.join(report.failing)}",
        "properties": report.failing,
        "first_failures": {
            name: report.outcomes[name].first_failure for name in report.failing
        },
    }
    print("ERROR " + json.dumps(details), file=sys.stderr)
    return PROPERTY_FAILURE
