"""Command-line entry point.

Subcommands: pca-bench, rgd-sweep, orth-violation, verify. Exit codes:
0 success, 1 check failure, 2 configuration error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import bench
from .errors import ConfigurationError, NumericError

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_ERROR = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcsd-bench",
        description="Stiefel-manifold optimizer benchmarks and bound verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pca = sub.add_parser("pca-bench", help="compare optimizers on the weighted-PCA instance")
    pca.add_argument("config", nargs="?", help="INI config file (omit for the built-in default)")
    pca.add_argument("--output-dir", help="override the output directory")

    sweep = sub.add_parser("rgd-sweep", help="sweep constant step sizes for RGD")
    sweep.add_argument("config", nargs="?", help="INI config file (omit for the built-in default)")
    sweep.add_argument("--steps", nargs="+", type=float, required=True, metavar="ALPHA",
                       help="constant step sizes to try")
    sweep.add_argument("--output-dir", help="override the output directory")

    orth = sub.add_parser("orth-violation", help="track the orthogonality violation of every method")
    orth.add_argument("config", nargs="?", help="INI config file (omit for the built-in default)")
    orth.add_argument("--output-dir", help="override the output directory")

    verify = sub.add_parser("verify", help="run the descent/convergence bound checks")
    verify.add_argument("--level", choices=("fast", "full"), default="fast")
    verify.add_argument("--report", help="write machine-readable check lines to this file")

    return parser


def _load_config(args) -> bench.BenchConfig:
    if args.config:
        cfg = bench.load_config(args.config)
    else:
        out = os.environ.get(bench.ENV_OUTPUT_DIR, "bench-out")
        cfg = bench.default_pca_config(out)
    if getattr(args, "output_dir", None):
        from dataclasses import replace

        cfg = replace(cfg, output_dir=Path(args.output_dir))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC_ERROR


def _print_method_summary(summary) -> None:
    for label, st in summary["methods"].items():
        if st["mean_final_subspace_error"] is None:
            print(f"{label}: aborted")
        else:
            print(
                f"{label}: mean final subspace error {st['mean_final_subspace_error']:.6e}, "
                f"mean step wall time {st['mean_step_wall_s']:.3f} s"
            )


def _dispatch(args) -> int:
    if args.command == "pca-bench":
        cfg = _load_config(args)
        summary = bench.run_pca_bench(cfg)
        _print_method_summary(summary)
        if summary["aborted"]:
            for label, st in summary["methods"].items():
                for msg in st["abort_messages"]:
                    print(f"ABORT {msg}", file=sys.stderr)
            return EXIT_NUMERIC_ERROR
        return EXIT_OK

    if args.command == "rgd-sweep":
        cfg = _load_config(args)
        summary = bench.run_rgd_sweep(cfg, args.steps)
        for alpha, err in summary["final_subspace_error"].items():
            print(f"alpha={alpha}: final subspace error {err:.6e}")
        print(f"winner: alpha={summary['winner']:g}")
        if summary["aborted"]:
            return EXIT_NUMERIC_ERROR
        return EXIT_OK

    if args.command == "orth-violation":
        cfg = _load_config(args)
        summary = bench.run_orth_violation(cfg)
        print(f"max orthogonality violation: {summary['max_violation']:.3e} (limit {summary['limit']:.0e})")
        if summary["breaches"]:
            for breach in summary["breaches"]:
                print(f"BREACH {breach}", file=sys.stderr)
            return EXIT_CHECK_FAILURE
        return EXIT_OK

    if args.command == "verify":
        reports = bench.run_verify(args.level)
        for report in reports:
            print(report.human_lines())
        lines = [r.machine_line() for r in reports]
        print("name,lhs,rhs,slack,passed")
        for line in lines:
            print(line)
        if args.report:
            Path(args.report).write_text("name,lhs,rhs,slack,passed\n" + "\n".join(lines) + "\n")
        return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILURE

    raise ConfigurationError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
