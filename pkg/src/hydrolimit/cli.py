"""Command line entry point: ``hydrolimit <command> [options]``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import harness
from .equilibrium import DomainError, QuadratureError
from .harness import ConfigError, ExperimentConfig
from .pde import CFLError
from .zrp import AbsorbingState

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 2, 3, 4

COMMANDS = {
    "converge": harness.run_convergence,
    "concentrate": harness.run_concentration,
    "couple": harness.run_coupling_test,
    "invariance": harness.run_invariance_test,
    "ensembles": harness.run_ensembles_study,
    "lln": harness.run_lln_study,
    "pde": harness.run_pde,
    "validate": harness.run_validate,
}

NUMERIC_ERRORS = (FloatingPointError, CFLError, QuadratureError, DomainError, AbsorbingState,
                  ArithmeticError)


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hydrolimit", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON file with ExperimentConfig fields")
    parser.add_argument("--seed", type=int, help="base seed (u64)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="worker threads for replicas")
    parser.add_argument("--format", choices=["csv", "json"], default="json",
                        help="what to echo on stdout (files are always written)")
    parser.add_argument("--keep-snapshots", action="store_true")
    parser.add_argument("--assert", dest="check", action="store_true",
                        help="exit with status 4 if the acceptance check fails")
    over = parser.add_argument_group("config overrides")
    over.add_argument("--model")
    over.add_argument("--N", dest="N_list", type=_int_list, metavar="N1,N2,...")
    over.add_argument("--replicas", type=int)
    over.add_argument("--T", type=float)
    over.add_argument("--checkpoints", type=int)
    over.add_argument("--M", type=int)
    over.add_argument("--K", type=int)
    over.add_argument("--epsilon", type=float)
    over.add_argument("--observable")
    over.add_argument("--coupling-init", dest="coupling_init")
    over.add_argument("--density", type=float)
    over.add_argument("--ells", type=_int_list, metavar="L1,L2,...")
    over.add_argument("--samples", type=int)
    over.add_argument("-v", "--verbose", action="store_true")
    return parser


def make_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = ExperimentConfig.from_json(args.config).to_dict()
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in ("seed", "threads", "model", "N_list", "replicas", "T", "checkpoints", "M", "K",
                "epsilon", "observable", "coupling_init", "density", "ells", "samples"):
        val = getattr(args, key, None)
        if val is not None and key in names:
            data[key] = val
    if args.out is not None:
        data["out_dir"] = args.out
    if args.keep_snapshots:
        data["keep_snapshots"] = True
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = make_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    out = Path(config.out_dir)
    if args.format == "csv" and (out / "curves.csv").exists():
        sys.stdout.write((out / "curves.csv").read_text())
    else:
        summary = {k: v for k, v in report.items() if not k.startswith("_") and k != "config"}
        sys.stdout.write(json.dumps(harness._clean(summary), sort_keys=True) + "\n")
    if args.check and not report.get("passed", False):
        print(f"{args.command}: acceptance check failed", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
