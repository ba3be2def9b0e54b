"""Command line: ``starris validate <config>`` and ``starris run <kind> ...``."""
import argparse
import logging
import sys

import numpy as np

from . import configfile
from .errors import ConfigError, GeometryError, InvariantError, SolverError
from .experiments import KINDS, ExperimentSpec, run_experiment, write_outputs
from .scenario import SIDE_NAMES, allocate_users, build_geometry

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(prog="starris", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    val = sub.add_parser("validate", help="check a config file and print it resolved")
    val.add_argument("config")
    val.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("kind", choices=KINDS)
    run.add_argument("--config", help="config file (defaults to built-in values)")
    run.add_argument("--seed", type=int, help="master seed (defaults to the config seed)")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config or experiment key, repeatable")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    return parser


def _validate(args):
    cfg, exp = configfile.load(args.config, args.set)
    geo = build_geometry(cfg, np.random.default_rng(cfg.seed))
    alloc = allocate_users(geo, cfg.R, cfg.K)
    print(f"# {args.config}: valid")
    print(configfile.format_config(cfg), end="")
    if exp:
        print("[experiment]")
        for key, value in exp.items():
            print(f"{key} = {value!r}")
        print()
    print("# allocation")
    for r, (kr, kt) in enumerate(alloc.pairs):
        print(f"# RIS {r + 1}: {SIDE_NAMES[0]} user {kr + 1}, {SIDE_NAMES[1]} user {kt + 1}")
    return EXIT_OK


def _run(args):
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    cfg, exp = configfile.load(args.config, args.set)
    seed = cfg.seed if args.seed is None else args.seed
    if seed < 0:
        raise ConfigError("--seed must be non-negative")
    cfg = cfg.replace(seed=seed)
    spec = ExperimentSpec(args.kind, cfg, seed, args.out, exp, args.jobs)
    result = run_experiment(spec)
    paths = write_outputs(spec, result)
    for line in result.summary:
        print(line)
    print("wrote " + ", ".join(paths))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return _validate(args)
        return _run(args)
    except (ConfigError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, InvariantError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
