"""Command-line entry point: ``loewner-shm {simulate,identify,indices,full-run}``."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import LoewnerShmError
from .pipeline import cmd_full_run, cmd_identify, cmd_indices, cmd_simulate, error_payload, load_config

COMMANDS = {
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "indices": cmd_indices,
    "full-run": cmd_full_run,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loewner-shm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--out", default=None, help="output directory; overrides the config")
        p.add_argument("--seed", type=int, default=None, help="tangential-direction seed; overrides the config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, {"seed": args.seed, "outputs": args.out})
        COMMANDS[args.command](config)
    except (LoewnerShmError, OSError, ValueError, ArithmeticError) as exc:
        sys.stderr.write(json.dumps(error_payload(exc), sort_keys=True) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
