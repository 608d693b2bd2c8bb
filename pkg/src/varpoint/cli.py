"""Command-line front end for the experiment runners.

Subcommands: ``verify`` and ``estimate`` run their fixed experiment,
``experiment NAME`` runs any named experiment, and ``report PATH`` re-renders
a stored record table.  A JSON config supplies parameters; command-line flags
override its grid, seed, worker, and output settings.  Output lands in
``--out``, else ``$VARPOINT_OUT``, else ``./varpoint-out``.  Exit status is 0
when every checked record passed, 1 otherwise, 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .errors import (
    ConfigError,
    DomainError,
    NormalizationError,
    ResolutionError,
    SizeCapError,
    UnsupportedKernelError,
)

_LIBRARY_ERRORS = (DomainError, NormalizationError, ResolutionError,
                   SizeCapError, UnsupportedKernelError)
from .experiments import (
    EXPERIMENT_NAMES,
    default_config,
    emit_report,
    load_config,
    read_records,
    run_estimate,
    run_experiment,
)


def _add_common(parser):
    parser.add_argument("--config", metavar="PATH",
                        help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, metavar="N")
    parser.add_argument("--out", metavar="DIR",
                        help="output directory (default $VARPOINT_OUT "
                             "or ./varpoint-out)")
    parser.add_argument("--grid", type=int, metavar="N",
                        help="grid extent per axis")
    parser.add_argument("--dim", type=int, choices=(1, 2))
    parser.add_argument("--workers", type=int, metavar="N")
    parser.add_argument("--format", choices=("csv", "json"), dest="fmt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varpoint",
        description="variation and jump operator experiments")
    sub = parser.add_subparsers(dest="command")
    for name in ("verify", "estimate"):
        _add_common(sub.add_parser(name))
    runner = sub.add_parser("experiment")
    runner.add_argument("name", choices=EXPERIMENT_NAMES)
    _add_common(runner)
    report = sub.add_parser("report")
    report.add_argument("records", metavar="PATH",
                        help="existing records.csv or records.jsonl")
    _add_common(report)
    return parser


def _out_dir(args) -> str:
    return args.out or os.environ.get("VARPOINT_OUT") or "varpoint-out"


def _resolve_config(args, experiment: str):
    if args.config:
        cfg = load_config(args.config)
        if cfg.experiment != experiment:
            cfg = replace(cfg, experiment=experiment)
    else:
        cfg = default_config(experiment, seed=args.seed or 0)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.grid is not None:
        overrides["extent"] = args.grid
    if args.dim is not None:
        overrides["dim"] = args.dim
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.fmt is not None:
        overrides["out_format"] = args.fmt
    return replace(cfg, **overrides) if overrides else cfg


def _print_records(records, paths) -> int:
    failures = 0
    checked = 0
    for rec in records:
        if not rec.status:
            continue
        checked += 1
        failures += rec.status == "FAIL"
        label = rec.metric
        if rec.operator_kind:
            label += f" [{rec.operator_kind}]"
        print(f"{rec.status:4s} {label}: {rec.value:.6g}  ({rec.witness})")
    print(f"{checked} checks, {failures} failed; "
          f"{len(records)} records -> {paths[0]}")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "report":
            records = read_records(args.records)
            fmt = args.fmt or ("json" if str(args.records).endswith(".jsonl")
                               else "csv")
            paths = emit_report(records, _out_dir(args), fmt)
        else:
            experiment = args.name if args.command == "experiment" else \
                ("moon_equivalence" if args.command == "estimate" else "verify")
            cfg = _resolve_config(args, experiment)
            if args.command == "estimate":
                records = run_estimate(cfg)
            else:
                records = run_experiment(cfg)
            paths = emit_report(records, _out_dir(args), cfg.out_format)
        return _print_records(records, paths)
    except ConfigError as exc:
        print(f"varpoint: config error: {exc}", file=sys.stderr)
        return 2
    except _LIBRARY_ERRORS as exc:
        print(f"varpoint: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
