from argparse import ArgumentParser, Namespace
import json
from pathlib import Path

import numpy as np

from msdiff.commands.defaults import DEFAULTS
from msdiff.equilibria import find_equilibrium
from msdiff.kinetics import ReactionNetwork
from msdiff.mixture import require_interior
from msdiff.scenario import load_scenario, mean_initial_composition
from msdiff.stability import spectrum_report


def init_parser_spectrum(parser: ArgumentParser):
    parser.add_argument("scenario", type=Path, help="Path to the YAML scenario file")
    parser.add_argument(
        "--k-max",
        type=int,
        default=DEFAULTS.K_MAX,
        help=f"Highest wave number per axis. Defaults to {DEFAULTS.K_MAX}",
    )
    parser.set_defaults(func=spectrum_command, timing=False)


def spectrum_command(args: Namespace) -> int:
    scenario = load_scenario(args.scenario)
    spec = scenario.mixture_spec()
    net = scenario.network() or ReactionNetwork.empty(spec.n_species)
    mean = mean_initial_composition(scenario)
    if net.m:
        y_star = find_equilibrium(net, spec, mean if np.all(mean > 0) else None).y_star.y
    else:
        require_interior(mean)
        y_star = mean
    report = spectrum_report(
        spec, net, y_star, scenario.grid.lengths, args.k_max, args.max_workers
    )
    output = {
        **report.as_dict(),
        "y_star": y_star.tolist(),
        "decay_rate": report.decay_rate(spec.rho),
    }
    print(json.dumps(output, indent=2))
    return 0
