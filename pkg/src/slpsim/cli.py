"""Command-line front end.

Examples
--------
Build the critical-value cache, then reproduce the burst experiment::

    slpsim critvals --table critvals.txt
    slpsim figure5 --table critvals.txt --out results/fig5 --runs 250
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .experiment import (ExperimentConfig, emit, run_all_variants, run_experiment,
                         run_figure3, run_figure4, run_figure5)
from .stats_core import DEFAULT_ALPHAS, DEFAULT_SIZES, MIN_REPLICATES, load_or_generate

log = logging.getLogger("slpsim")

QUICK_RUNS = 5
QUICK_SIZES = (5, 10, 20, 50, 100, 200)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value experiment config file")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--runs", type=int, help="number of independent runs R")
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--d", type=int, help="dummy population size")
    common.add_argument("--quick", action="store_true",
                        help=f"smoke-test scale (R={QUICK_RUNS} unless --runs is given)")
    common.add_argument("--table", default="critvals.txt",
                        help="critical-value table cache file")
    common.add_argument("--no-generate", action="store_true",
                        help="fail instead of building a missing table")
    common.add_argument("--replicates", type=int, default=MIN_REPLICATES,
                        help="Monte-Carlo replicates per table entry")
    common.add_argument("--table-seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="slpsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("critvals", parents=[common], help="build or refresh the table")
    sub.add_parser("calibrate", parents=[common], help="event-free false-alarm baseline")
    for name in ("figure3", "figure4", "figure5"):
        sub.add_parser(name, parents=[common], help=f"reproduce {name}")
    sub.add_parser("variants", parents=[common], help="compare the three generators")
    sub.add_parser("run", parents=[common], help="run one configured experiment")
    return p


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    elif args.quick:
        changes["runs"] = QUICK_RUNS
    if args.d is not None:
        changes["scheduler.d"] = args.d
    return cfg.updated(**changes) if changes else cfg


def _table(args, sizes=DEFAULT_SIZES):
    return load_or_generate(args.table, sizes, DEFAULT_ALPHAS, args.replicates,
                            args.table_seed, generate=not args.no_generate)


def _ds(args):
    return (args.d,) if args.d is not None else (10, 100)


def _with_events(cfg: ExperimentConfig) -> ExperimentConfig:
    # event-axis observation needs real events; default to Poisson ones
    if cfg.eve.axis == "event" and cfg.event_model is None:
        return cfg.updated(**{"event.kind": "pure", "event.mu": cfg.scheduler.mu})
    return cfg


def _emit_all(results: dict, out: str) -> None:
    for label, res in results.items():
        emit(res, os.path.join(out, label))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "critvals":
            sizes = QUICK_SIZES if args.quick else DEFAULT_SIZES
            table = _table(args, sizes)
            log.info("table %s: %d entries", args.table, len(table.entries))
            return 0
        cfg = _config(args)
        table = _table(args)
        if args.command == "run":
            emit(run_experiment(_with_events(cfg), table), args.out)
        elif args.command == "calibrate":
            emit(run_experiment(_with_events(cfg), table, calibration=True), args.out)
        elif args.command == "figure3":
            _emit_all(run_figure3(cfg.updated(**{"event.kind": None}), table, _ds(args)),
                      args.out)
        elif args.command == "figure4":
            _emit_all(run_figure4(cfg, table, _ds(args)), args.out)
        elif args.command == "figure5":
            _emit_all(run_figure5(cfg, table, _ds(args)), args.out)
        elif args.command == "variants":
            outcome = run_all_variants(_with_events(cfg), table)
            _emit_all(outcome["results"], args.out)
            with open(os.path.join(args.out, "variants.json"), "w") as fh:
                json.dump(outcome["report"], fh, indent=2, sort_keys=True)
                fh.write("\n")
    except (ValueError, KeyError, OSError) as exc:
        print(f"slpsim: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
