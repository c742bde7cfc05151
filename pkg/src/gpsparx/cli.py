"""Command-line entry point.

Angles are radians unless ``--degrees`` is given; ``phi`` is the
direction the wind blows toward, counterclockwise from +x.

Exit codes: 0 success, 2 input/config error, 3 numerical/runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiment
from .errors import GpSparxError, InputError
from .geometry import grid_layout

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("gpsparx")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment config JSON")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, default=Path("gpsparx-out"), help="output directory")
    p.add_argument("--mode", choices=["osa", "cascade"], help="prediction mode (overrides the config)")
    p.add_argument("--degrees", action="store_true", help="angles in the config are in degrees")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpsparx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("simulate", "generate training and test datasets"),
        ("train", "fit one GP-SPARX model per training angle"),
        ("evaluate", "evaluate the switching model over the test sweep"),
        ("report", "print the evaluation summary"),
        ("run", "simulate, train and evaluate in one go"),
    ]:
        _common(sub.add_parser(name, help=help_))
    return parser


def load_config(args) -> experiment.ExperimentConfig:
    if args.config is not None:
        cfg = experiment.ExperimentConfig.load(args.config, degrees=args.degrees)
    else:
        cfg = experiment.ExperimentConfig(layout=grid_layout())
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise InputError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        cfg = replace(cfg, seed=args.seed)
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode)
    return cfg


def _report(out: Path) -> str:
    path = out / "report" / "summary.json"
    if not path.is_file():
        raise InputError(f"no evaluation summary at {path}; run 'evaluate' first")
    return experiment.format_summary(json.loads(path.read_text()))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            print(_report(args.out))
            return EXIT_OK
        cfg = load_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            for path in experiment.run_simulate(cfg, args.out):
                print(path)
        elif args.command == "train":
            print(experiment.run_train(cfg, args.out))
        elif args.command == "evaluate":
            experiment.run_evaluate(cfg, args.out)
            print(_report(args.out))
        elif args.command == "run":
            experiment.run_all(cfg, args.out)
            print(_report(args.out))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GpSparxError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
