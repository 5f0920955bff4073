"""Command-line entry point.

Subcommands: theory | simulate | compare | check-lemmas | plotdata.
Exit codes: 0 ok, 1 config error, 2 comparison failure, 3 runtime error.
--threads changes scheduling only; outputs are byte-identical for any value.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .config import load_config
from .errors import ComparisonError, ConfigError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mfcascade",
                                 description="cascade-capacity experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [("theory", "write closed-form predictions"),
                        ("simulate", "run seeded Monte-Carlo estimates"),
                        ("compare", "compare simulation against predictions"),
                        ("check-lemmas", "survivor covering/crowding checks"),
                        ("plotdata", "emit plot-ready overlays")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=None,
                       help="output directory (default: run.output_dir)")
        if name == "simulate":
            p.add_argument("--threads", type=int, default=1,
                           help="worker threads across seeds (speed only)")
            p.add_argument("--dump-survivors", action="store_true")
            p.add_argument("--dump-levels", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = args.out if args.out is not None else cfg.output_dir
        from . import runner
        if args.command == "theory":
            return runner.run_theory(cfg, out)
        if args.command == "simulate":
            return runner.run_simulate(cfg, out, threads=args.threads,
                                       dump_survivors=args.dump_survivors,
                                       dump_levels=args.dump_levels)
        if args.command == "compare":
            return runner.run_compare(cfg, out)
        if args.command == "check-lemmas":
            return runner.run_check_lemmas(cfg, out)
        if args.command == "plotdata":
            return runner.run_plotdata(cfg, out)
        raise RuntimeError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ComparisonError as exc:
        print(f"comparison error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
