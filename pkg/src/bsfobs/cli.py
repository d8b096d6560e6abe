"""Command-line interface.

Exit codes: 0 success, 1 configuration/usage error, 2 numerical abort,
3 injectivity condition fails (``check``), 4 condition fails and
``reconstruct`` was not forced.
"""
from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from .estimator import DifferentiatorSpec, error_metrics, reconstruct
from .observability import check_theorem1, curve_trace
from .params import ConfigError, load_config
from .sim import MeasurementSeries, SimulationError, load_scenario, read_trajectory_csv, sample_measurements
from .sweep import random_parameter_sets, run_sweep, write_sweep_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_OBSERVABLE, EXIT_REFUSED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2, which is reserved for numerical aborts
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def cmd_simulate(args) -> int:
    params = load_config(args.params).lumped
    scenario = load_scenario(args.scenario)
    traj = scenario.run(params)
    traj.to_csv(args.out)
    if args.measurements:
        meas = sample_measurements(traj, scenario.noise) if scenario.noise else MeasurementSeries.from_trajectory(traj)
        meas.to_csv(args.measurements)
    print(f"wrote {len(traj)} samples to {args.out}")
    return EXIT_OK


def _format_report(report) -> str:
    verdict = "OBSERVABLE" if report.condition_holds else "NOT OBSERVABLE"
    lines = [
        f"{verdict}, margin {report.condition_margin:+.6g}",
        f"vertex x1* = {report.x1_star:.6g}, omega1 max = {report.omega1_max:.6g}",
        f"omega1 roots = ({report.omega1_roots[0]:.6g}, {report.omega1_roots[1]:.6g})",
    ]
    c = report.certificate
    if c is not None:
        lines.append(f"certificate: x1 pair = ({c.x1_pair[0]:.6g}, {c.x1_pair[1]:.6g}), "
                     f"nu* = {c.nu_star:.6g}, delta = {c.delta:.6g}, "
                     f"omega2 = {c.omega2_pair[0]:.6g}")
    return "\n".join(lines)


def cmd_check(args) -> int:
    params = load_config(args.params).lumped
    report = check_theorem1(params)
    print(report.to_json() if args.json else _format_report(report))
    return EXIT_OK if report.condition_holds else EXIT_NOT_OBSERVABLE


def cmd_trace_curve(args) -> int:
    if args.grid < 100:
        raise UsageError(f"--grid must be at least 100 (got {args.grid})")
    params = load_config(args.params).lumped
    trace = curve_trace(params, args.grid)
    trace.to_csv(args.out)
    if trace.self_intersects:
        xa, xb, w1, w2 = trace.locus
        print(f"self-intersection at x1 = ({xa:.6g}, {xb:.6g}), (omega1, omega2) = ({w1:.6g}, {w2:.6g})")
    else:
        print("no self-intersection")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    params = load_config(args.params).lumped
    try:
        spec = DifferentiatorSpec(args.window, args.poly)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = check_theorem1(params)
    if not report.condition_holds and not args.force:
        return _fail(f"injectivity condition fails (margin {report.condition_margin:+.6g}); use --force to proceed",
                     EXIT_REFUSED)
    try:
        meas = MeasurementSeries.read_csv(args.measurements)
    except OSError as exc:
        raise UsageError(f"{args.measurements}: cannot read measurements ({exc.strerror})") from exc
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = reconstruct(meas, params, spec)
    except ValueError as exc:
        raise UsageError(f"{args.measurements}: {exc}") from exc
    est.to_csv(args.out)
    print(f"wrote {len(est)} estimates to {args.out}")
    if args.truth:
        truth = read_trajectory_csv(args.truth)
        if len(truth) != len(est) or not np.allclose(truth.t, est.t):
            raise UsageError(f"{args.truth}: time grid does not match the measurements")
        m = error_metrics(est, truth.x[:, 0])
        print(f"interior samples {m.n}: max abs {m.max_abs:.3e}, max rel {m.max_rel:.3e}, rmse {m.rmse:.3e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.n < 0:
        raise UsageError("--n must be nonnegative")
    rows = run_sweep(random_parameter_sets(args.n, args.seed), args.grid, args.workers)
    write_sweep_csv(rows, args.out)
    off = [r for r in rows if not r.near_threshold]
    agree = sum(r.agree for r in off)
    print(f"{len(rows)} sets, {len(off)} off-threshold, agreement {agree}/{len(off)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bsfobs", description="Biomass observability analysis for the larva growth model.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate a scenario and write the trajectory CSV")
    p.add_argument("--params", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--measurements", help="also write the (noisy) measurement CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="decide global injectivity of the observability map")
    p.add_argument("--params", required=True)
    p.add_argument("--json", action="store_true", help="print the full report as JSON")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("trace-curve", help="write the (omega1, omega2) curve and report crossings")
    p.add_argument("--params", required=True)
    p.add_argument("--grid", type=int, default=10_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trace_curve)

    p = sub.add_parser("reconstruct", help="estimate biomass from a measurement CSV")
    p.add_argument("--params", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--window", type=int, default=11)
    p.add_argument("--poly", type=int, default=3)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="trajectory CSV with the true biomass, for error metrics")
    p.add_argument("--force", action="store_true", help="run even if the injectivity condition fails")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="compare analytic verdict, grid scan and curve test on random sets")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        return _fail(str(exc), EXIT_CONFIG)
    except SimulationError as exc:
        return _fail(str(exc), EXIT_NUMERIC)
    except OSError as exc:
        return _fail(f"{exc.filename}: {exc.strerror}", EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
