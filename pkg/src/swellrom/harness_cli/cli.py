"""Argument parsing and dispatch for the swellrom command."""

import argparse
import sys

from swellrom.errors import ConfigError, SolverFailure, UsageError
from swellrom.harness_cli import studies
from swellrom.harness_cli.config import load_config

_STUDIES = {
    "error-surface": studies.run_error_surface,
    "conservation": studies.run_conservation,
    "speedup": studies.run_speedup,
    "svd-compare": studies.run_svd_compare,
    "variance": studies.run_variance_sweep,
}
_COMMANDS = {
    "fom": studies.run_fom,
    "offline": studies.run_offline,
    "rom": studies.run_rom,
}
_OVERRIDE_FLAGS = (
    ("--eps-rb", "eps_rb", str),
    ("--eps-ei", "eps_ei", str),
    ("--mesh-h", "mesh_h", float),
    ("--dt", "dt", float),
    ("--t-final", "t_final", float),
    ("--train-grid", "train_grid", str),
    ("--test-count", "test_count", int),
    ("--seed", "seed", int),
    ("--out", "out", str),
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems share the config-error exit code
        raise ConfigError(message)


def _add_common(parser):
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="key=value config file")
    for flag, dest, kind in _OVERRIDE_FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=None)
    parser.add_argument("--non-conservative", dest="non_conservative",
                        action="store_true", default=False,
                        help="use the plain concentration update")


def build_parser():
    parser = _Parser(prog="swellrom",
                     description="moving-domain solute transport:"
                                 " full solver, reduction, studies")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        _add_common(sub.add_parser(name))
    study = sub.add_parser("study")
    study.add_argument("kind", choices=sorted(_STUDIES))
    _add_common(study)
    return parser


def _config_from(args):
    overrides = {dest: getattr(args, dest) for _, dest, _ in _OVERRIDE_FLAGS}
    if args.non_conservative:
        overrides["conservative"] = False
    return load_config(args.config, overrides)


def main(argv=None):
    """Run one command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        cfg = _config_from(args)
        if args.command == "study":
            _STUDIES[args.kind](cfg)
        else:
            _COMMANDS[args.command](cfg)
        return 0
    except SystemExit as exc:
        # argparse --help; parse errors are rerouted to ConfigError
        return 0 if exc.code in (0, None) else 3
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


def console_main():
    sys.exit(main())
