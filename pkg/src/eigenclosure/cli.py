"""Command-line entry point.

Each subcommand runs one stage against a run directory; ``pipeline`` runs
them all. Exit status is 0 on success, 2 for configuration errors and
``3 + stage index`` when a stage fails (generate=3 ... diagnose=7).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config
from .pipeline import STAGE_FUNCTIONS, STAGES, RunContext, StageError

__all__ = ["build_parser", "main"]

log = logging.getLogger("eigenclosure")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="run directory (overrides the config)")
    common.add_argument("--preset", choices=["desk", "paper"], help="size preset (default: paper)")
    common.add_argument("--case", choices=["frade", "hifi"], help="data source when no config sets it")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="eigenclosure",
        description="Bayesian inference of closure-operator eigenvalues for mean transport.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "write observation data (synthetic or ensemble statistics)",
        "sensitivity": "Sobol screening of eigenvalues and selection of K",
        "optimize": "fractional-model MLE, fixed tail and MAP point",
        "sample": "DRAM chain over the inferred eigenvalues",
        "diagnose": "KL divergences, summaries, correlations and predictive statistics",
        "pipeline": "run every stage in order",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, preset=args.preset, case=args.case, seed=args.seed, out=args.out)
        ctx = RunContext(config, config.out)
    except (OSError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    stages = STAGES if args.command == "pipeline" else (args.command,)
    results = {}
    try:
        for name in stages:
            results[name] = STAGE_FUNCTIONS[name](ctx)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return exc.exit_code
    print(json.dumps(results, indent=2, default=str))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
