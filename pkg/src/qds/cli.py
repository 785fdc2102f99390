"""Command-line interface.

Subcommands
-----------
simulate        run the orbit-ensemble experiments (Birkhoff / expanding /
                common-measure / genericity sections) and write their tables
srb             compute only the limit curves zeta(t) and density residuals
verify          run every section, print pass/fail per check, exit 1 on failure
correlations    run E-CORR sections
moments         run E-MOMENTS sections
identity-check  run E-IDENTITY sections (or a default batch without --config)
all             run every section, write a manifest, exit 1 on any failure

Exit codes: 0 pass, 1 criterion failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigurationError
from .harness import run_experiment, run_srb_only
from .output import write_manifest, write_table

SIMULATE_IDS = ("E-BIRKHOFF", "E-EXPANDING", "E-COMMON", "E-GENERIC")
SRB_IDS = ("E-BIRKHOFF", "E-EXPANDING", "E-GENERIC")


def _add_common_flags(sub):
    sub.add_argument("--config", type=Path, default=None,
                     help="experiment config file")
    sub.add_argument("--seed", type=int, default=None,
                     help="override every section's seed")
    sub.add_argument("--out", type=Path, default=Path("out"),
                     help="output directory")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker threads for ensemble chunks")
    sub.add_argument("--format", choices=("csv", "json"), default="csv",
                     help="table output format")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qds",
        description="quasistatic dynamical systems: simulation and verification",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "srb", "verify", "correlations", "moments",
                 "identity-check", "all"):
        _add_common_flags(commands.add_parser(name))
    return parser


def _load(args, required=True):
    if args.config is None:
        if required:
            raise ConfigurationError("--config is required for this command")
        return []
    configs = load_config(args.config)
    if args.seed is not None:
        configs = [dataclasses.replace(c, seed=args.seed) for c in configs]
    return configs


def _emit(result, out_dir: Path, fmt: str):
    files = []
    for key, (columns, rows) in sorted(result.tables.items()):
        path = out_dir / f"{result.name}_{key}"
        files.append(write_table(path, columns, rows, fmt))
    return files


def _run_selected(args, ids=None, check=False, manifest=False):
    configs = _load(args)
    if ids is not None:
        configs = [c for c in configs if c.experiment_id in ids]
    results, files = [], []
    for cfg in configs:
        result = run_experiment(cfg, threads=args.threads)
        results.append(result)
        files.extend(_emit(result, args.out, args.format))
        for line in result.summary_lines():
            print(line)
    if manifest:
        seed = args.seed if args.seed is not None else (
            configs[0].seed if configs else None)
        path = write_manifest(args.out, args.config, seed, results, files)
        print(f"manifest: {path}")
    if check and any(not r.passed for r in results):
        return 1
    return 0


def _run_srb(args):
    configs = [c for c in _load(args) if c.experiment_id in SRB_IDS]
    for cfg in configs:
        result = run_srb_only(cfg, threads=args.threads)
        _emit(result, args.out, args.format)
        print(f"[done] {cfg.name}: zeta curve written")
    return 0


def _run_identity(args):
    configs = [c for c in _load(args, required=False)
               if c.experiment_id == "E-IDENTITY"]
    if not configs:
        configs = [ExperimentConfig(
            name="identity", experiment_id="E-IDENTITY",
            seed=args.seed if args.seed is not None else 0)]
    rc = 0
    for cfg in configs:
        result = run_experiment(cfg, threads=args.threads)
        _emit(result, args.out, args.format)
        for line in result.summary_lines():
            print(line)
        if not result.passed:
            rc = 1
    return rc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _run_selected(args, ids=SIMULATE_IDS)
        if args.command == "srb":
            return _run_srb(args)
        if args.command == "verify":
            return _run_selected(args, check=True)
        if args.command == "correlations":
            return _run_selected(args, ids=("E-CORR",), check=True)
        if args.command == "moments":
            return _run_selected(args, ids=("E-MOMENTS",), check=True)
        if args.command == "identity-check":
            return _run_identity(args)
        if args.command == "all":
            return _run_selected(args, check=True, manifest=True)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
