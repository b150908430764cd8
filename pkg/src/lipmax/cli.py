"""Command-line entry point: ``lipmax {compute,verify,scan,fixtures}``.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O or parse error.
Scan findings (bounded, diverging) never change the exit code.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__, fixtures, verify
from .grid import Cube
from .operators import (ScaleSet, frac_mf, local_mf, maximal_commutator, mf_fast, nonlinear_commutator,
                        subsampling_error)
from .report_io import GridFileError, dumps_json, read_config, read_grid_function, write_grid_function, write_report
from .scan import THREADS_ENV, THEOREMS, default_threads, run_config, theorem_suite

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _threads(value: str) -> int:
    k = int(value)
    if k < 1:
        raise argparse.ArgumentTypeError("--threads must be >= 1")
    return k


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lipmax", description="Discrete maximal operators and their commutators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=_threads, default=None,
                        help=f"worker cap (default: ${THREADS_ENV}, else 1); results do not depend on it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="evaluate one operator on a grid-function file")
    p.add_argument("--op", required=True, choices=["mf", "fracmf", "mb", "nonlinear", "localmf"])
    p.add_argument("--in", dest="input", required=True, help="input grid function f (or b for localmf)")
    p.add_argument("--symbol", help="symbol b, required for mb and nonlinear")
    p.add_argument("--alpha", type=float, help="order of the fractional maximal function, 0 < alpha < n")
    p.add_argument("--scales", choices=["all", "geo"], default="all")
    p.add_argument("--cube", help="cube literal 'o0,o1,...:s' for localmf")
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--all", action="store_true", help="also run the refinement scans (criteria 8-11)")
    p.add_argument("--only", nargs="+", metavar="ID", help="run only these check ids")

    p = sub.add_parser("scan", help="run a theorem suite or a single refinement scan from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--theorem", choices=sorted(THEOREMS), help="override the theorem named in the config")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["json", "csv"], default=None,
                   help="report format (default: from the --out suffix, else json)")

    p = sub.add_parser("fixtures", help="write the hand-computed fixtures and example scan configs")
    p.add_argument("--out-dir", default="fixtures")
    return parser


def _echo_config(record: dict) -> None:
    print(dumps_json({"resolved_config": record}), end="", flush=True)


def cmd_compute(args) -> int:
    f = read_grid_function(args.input)
    record = {"command": "compute", "op": args.op, "in": args.input, "symbol": args.symbol,
              "alpha": args.alpha, "scales": args.scales, "cube": args.cube, "out": args.out,
              "grid": f.grid.describe()}
    if args.op in ("mb", "nonlinear") and args.symbol is None:
        raise UsageError(f"--op {args.op} needs --symbol")
    if args.op == "fracmf" and args.alpha is None:
        raise UsageError("--op fracmf needs --alpha")
    if args.op == "localmf" and args.cube is None:
        raise UsageError("--op localmf needs --cube")
    if args.op != "localmf" and args.cube is not None:
        raise UsageError("--cube only applies to --op localmf")
    _echo_config(record)

    scales = ScaleSet.from_mode(args.scales, f.grid.N)
    if args.op == "mf":
        g = mf_fast(f, scales)
    elif args.op == "fracmf":
        g = frac_mf(f, args.alpha, scales)
    elif args.op == "localmf":
        g = local_mf(f, Cube.parse(args.cube))
    else:
        b = read_grid_function(args.symbol)
        op = maximal_commutator if args.op == "mb" else nonlinear_commutator
        g = op(b, f, scales)
    if args.scales == "geo":
        print(f"geometric scales: subsampling error of M f = {subsampling_error(f):.3e}", file=sys.stderr)
    write_grid_function(g, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    _echo_config({"command": "verify", "all": args.all, "only": args.only})
    return EXIT_OK if verify.run(include_scans=args.all, ids=args.only) else EXIT_VERIFY


def cmd_scan(args, threads: int) -> int:
    cfg = read_config(args.config)
    if args.theorem is not None:
        cfg.theorem, cfg.functional = args.theorem, None
    fmt = args.format or ("csv" if args.out.lower().endswith(".csv") else "json")
    _echo_config({"command": "scan", "config": cfg.to_dict(), "threads": threads, "format": fmt,
                  "out": args.out})
    report = theorem_suite(cfg.theorem, cfg, threads) if cfg.theorem else run_config(cfg, threads)
    with open(args.out, "wb") as fh:
        fh.write(write_report(report, fmt))
    for it in report.items:
        slope = "n/a" if it.slope is None else f"{it.slope:+.3f}"
        print(f"{it.item:>8} {it.functional:<28} slope {slope:>7}  {it.classification}")
    if report.flags:
        print("flags: " + ", ".join(f"{k}={v}" for k, v in report.flags.items()))
        print(f"consistent: {report.consistent}")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    _echo_config({"command": "fixtures", "out_dir": args.out_dir})
    for path in fixtures.write_fixtures(args.out_dir):
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    threads = args.threads if args.threads is not None else default_threads()
    try:
        if args.command == "compute":
            return cmd_compute(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "scan":
            return cmd_scan(args, threads)
        return cmd_fixtures(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lipmax: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GridFileError, json.JSONDecodeError, OSError) as exc:
        print(f"lipmax: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        # bad parameters inside an otherwise readable file or flag
        print(f"lipmax: error: {exc}", file=sys.stderr)
        return EXIT_IO if args.command == "scan" else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
