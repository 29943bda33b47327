"""Command line entry point: ``subspace-psld {verify-theorems,run,report}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from ..errors import ConfigError
from . import config as config_mod
from .report import ReportError, read_rows, summarize, write_summary
from .runner import run_experiment
from .verify import format_table, run_verification, write_report

OUT_ENV = "SUBSPACE_PSLD_OUT"


def _load(args) -> config_mod.ExperimentConfig:
    cfg = config_mod.load(args.config) if args.config else config_mod.ExperimentConfig()
    if args.seed_base is not None:
        cfg.seed_base = args.seed_base
    if args.tolerance is not None:
        cfg.tolerance = args.tolerance
    return cfg


def _out_dir(args, cfg=None) -> str:
    if args.out:
        return args.out
    if os.environ.get(OUT_ENV):
        return os.environ[OUT_ENV]
    return cfg.out_dir if cfg is not None else "results"


def cmd_verify(args) -> int:
    cfg = _load(args)
    results = run_verification(cfg)
    print(format_table(results))
    path = write_report(results, _out_dir(args, cfg))
    print(f"report written to {path}")
    if any(r.status.startswith("SKIPPED") for r in results):
        print("warning: some checks were skipped because (AS)^T(AS) is singular",
              file=sys.stderr)
    return 0 if all(r.ok for r in results) else 1


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    try:
        rows = run_experiment(cfg, out, workers=args.workers)
    except OSError as exc:
        print(f"error: cannot write results to {out}: {exc}", file=sys.stderr)
        return 1
    print(f"{len(rows)} rows written to {os.path.join(out, 'results.csv')}")
    return 0


def cmd_report(args) -> int:
    try:
        rows = read_rows(args.csv)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not rows:
        print("error: no result rows found", file=sys.stderr)
        return 2
    _, text = write_summary(summarize(rows), _out_dir(args))
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subspace-psld", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        if with_config:
            p.add_argument("--config", help="YAML experiment configuration")
            p.add_argument("--tolerance", type=float, help="override exact-recovery tolerance")
            p.add_argument("--seed-base", type=int, help="first trial seed")
        p.add_argument("--out", help=f"output directory (or ${OUT_ENV})")

    p = sub.add_parser("verify-theorems", help="run the exact-recovery verification suite")
    common(p)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("run", help="run an operator x sampler x seed grid")
    common(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("report", help="summarise result CSVs")
    common(p, with_config=False)
    p.add_argument("csv", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
