"""Command-line entry point.

    spsaa rate      --config plan.json --out dir/
    spsaa tail      --config plan.json --out dir/
    spsaa stability --config plan.json --out dir/
    spsaa selftest

Exit codes: 0 success, 2 when a declared acceptance threshold fails,
1 on configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .harness import ExperimentError, ExperimentPlan, emit, run_plan
from .selftest import run_selftest

_EXIT_OK = 0
_EXIT_ERROR = 1
_EXIT_THRESHOLD = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spsaa",
        description="Monte Carlo experiments for sample-average and mirror-descent solvers",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in ("rate", "tail", "stability"):
        p = sub.add_parser(kind, help=f"run a {kind} experiment plan")
        p.add_argument("--config", required=True, help="path to the plan JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument(
            "--format", choices=("csv", "json", "both"), default="both",
            help="which artifacts to write",
        )
    sub.add_parser("selftest", help="run the built-in invariant suites")
    return parser


def _load_plan(args) -> ExperimentPlan:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if cfg.get("kind") != args.command:
        raise ExperimentError(
            f"plan kind {cfg.get('kind')!r} does not match subcommand {args.command!r}"
        )
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    return ExperimentPlan.from_config(cfg)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "selftest":
        return _EXIT_OK if run_selftest() else _EXIT_THRESHOLD
    try:
        plan = _load_plan(args)
        report = run_plan(plan)
        paths = emit(report, args.out, fmt=args.format)
    except (ExperimentError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_ERROR
    for path in paths:
        print(f"wrote {path}")
    if report.fit is not None:
        print(
            f"fit: slope={report.fit['slope']:.4f}"
            f" r2={report.fit['r_squared']:.4f}"
        )
    for name, ok in sorted(report.checks.items()):
        print(f"check {name}: {'PASS' if ok else 'FAIL'}")
    if not report.passed:
        return _EXIT_THRESHOLD
    return _EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
