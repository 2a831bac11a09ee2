from argparse import ArgumentParser, Namespace
import json
from pathlib import Path

import numpy as np

from msdiff.equilibria import find_equilibrium
from msdiff.kinetics import ReactionNetwork, validate_network
from msdiff.scenario import load_scenario, mean_initial_composition


def init_parser_equilibrium(parser: ArgumentParser):
    parser.add_argument("scenario", type=Path, help="Path to the YAML scenario file")
    parser.set_defaults(func=equilibrium_command, timing=False)


def equilibrium_command(args: Namespace) -> int:
    scenario = load_scenario(args.scenario)
    spec = scenario.mixture_spec()
    net = scenario.network() or ReactionNetwork.empty(spec.n_species)
    mean = mean_initial_composition(scenario)
    result = find_equilibrium(net, spec, mean if np.all(mean > 0) else None)
    output = {**result.as_dict(), "validation": validate_network(net, spec).as_dict()}
    print(json.dumps(output, indent=2))
    return 0
