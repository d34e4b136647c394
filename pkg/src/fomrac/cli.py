"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .config import ConfigError, load_config
from .experiment import run_experiment
from .mrac import MatchingError, lyapunov_q, solve_matching_gains
from .verify import LEVELS, group_names, verify_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_VERIFY = 4


def _fmt(a) -> str:
    return np.array2string(np.asarray(a, dtype=float), precision=10, suppress_small=True)


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    if args.output:
        from dataclasses import replace

        config = replace(config, output=replace(config.output, path=args.output))
    traj, metrics = run_experiment(config)
    settle = "unsettled" if metrics.settle_time is None else f"{metrics.settle_time:.6g}"
    print(f"samples: {len(traj)}")
    if config.output.path:
        print(f"csv: {config.output.path}")
    print(f"diverged: {str(metrics.diverged).lower()}")
    if metrics.diverged:
        print(f"diverged_at: {metrics.diverged_at:.6g}")
    print(f"settle_time: {settle}")
    print(f"final_window_max_error: {metrics.final_window_max_error:.6g}")
    print(f"max_control: {metrics.max_control:.6g}")
    return EXIT_DIVERGED if metrics.diverged else EXIT_OK


def cmd_match_gains(args) -> int:
    config = load_config(args.config)
    try:
        gains = solve_matching_gains(config.plant, config.reference)
    except MatchingError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    print(f"theta1_0: {_fmt(gains.theta1_0)}")
    print(f"theta2_0: {gains.theta2_0:.10g}")
    print(f"theta3_0: {_fmt(gains.theta3_0)}")
    print(f"residual: {gains.residual:.3e}")
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    config = load_config(args.config)
    pair = lyapunov_q(config.adaptation.P, config.reference.A_m)
    print(f"P:\n{_fmt(pair.P)}")
    print(f"Q:\n{_fmt(pair.Q)}")
    print(f"P positive definite: {str(pair.p_positive_definite).lower()}")
    print(f"Q positive definite: {str(pair.q_positive_definite).lower()}")
    return EXIT_OK


def cmd_verify(args) -> int:
    unknown = sorted(set(args.check or ()) - set(group_names(args.level)))
    if unknown:
        print(f"unknown check(s) for level {args.level}: {', '.join(unknown)}", file=sys.stderr)
        print(f"available: {', '.join(group_names(args.level))}", file=sys.stderr)
        return EXIT_CONFIG
    report = verify_suite(args.level, select=args.check or None)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fomrac",
        description="Adaptive control of fractional-order systems: simulation and checks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment, write its CSV, print metrics")
    p.add_argument("config", help="config file, or the name of a shipped one (paper_sec4)")
    p.add_argument("-o", "--output", help="override the CSV output path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the verification suites")
    p.add_argument("--level", choices=LEVELS, default="all")
    p.add_argument("--check", action="append", help="run only this check group (repeatable)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("match-gains", help="print the nominal matching gains")
    p.add_argument("config")
    p.set_defaults(func=cmd_match_gains)

    p = sub.add_parser("lyapunov", help="print Q = -(P A_m + A_m^T P) and PD verdicts")
    p.add_argument("config")
    p.set_defaults(func=cmd_lyapunov)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if args.command == "verify":
            raise
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
