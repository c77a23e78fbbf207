"""Command line entry point.

    dclag simulate   <config> [--out DIR] [--steps N]
    dclag stability  <config> [--out DIR] [--seed N]
    dclag match-check <config> [--out DIR] [--steps N]
    dclag mpc        <config> [--out DIR] [--steps N]

Exit codes: 0 ok, 2 configuration error, 3 solver non-convergence,
4 instability detected while ``assert_stable = true``. Failures print one line
to stderr: ``error code=<n> kind=<Kind> line=<line or -> message=<json string>``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import warnings

import numpy as np

from . import harness
from .config import ConfigError, parse_config
from .mechanics import ModelEvaluationError, NonConvergence
from .mpc import BudgetExceeded

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_UNSTABLE = 0, 2, 3, 4


class CliFailure(Exception):
    def __init__(self, code, kind, message, line=None):
        super().__init__(message)
        self.code, self.kind, self.line = code, kind, line


def _fail_line(exc: CliFailure):
    line = "-" if exc.line is None else str(exc.line)
    return f"error code={exc.code} kind={exc.kind} line={line} message={json.dumps(str(exc))}"


def _load(args, mode=None):
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliFailure(EXIT_CONFIG, "ConfigUnreadable", f"{args.config}: {exc.strerror}")
    try:
        spec = parse_config(text)
        changes = {}
        if mode is not None:
            changes["mode"] = mode
        if getattr(args, "steps", None) is not None:
            if mode == "mpc":
                changes["T_f"] = args.steps * spec.h
            else:
                changes["steps"] = args.steps
        if args.out is not None:
            changes["out"] = args.out
        if changes:
            spec = dataclasses.replace(spec, **changes)
    except ConfigError as exc:
        raise CliFailure(EXIT_CONFIG, exc.kind, str(exc), exc.line)
    except ValueError as exc:
        raise CliFailure(EXIT_CONFIG, "ConfigError", str(exc))
    return spec


def _guard_stability(spec):
    if not spec.assert_stable:
        return
    _, report, cond = harness.stability_report(spec)
    if harness.is_unstable(report):
        raise CliFailure(EXIT_UNSTABLE, "Unstable",
                         f"spectral radius {report.spectral_radius:.6g}; violated: "
                         + ", ".join(cond.violated() or ["none"]))


def cmd_simulate(args):
    spec = _load(args)
    _guard_stability(spec)
    out = harness.ensure_dir(spec.out)
    if spec.mode == "mpc":
        return _write_mpc(spec, out)
    table = harness.run_simulation(spec)
    harness.write_csv(os.path.join(out, "trajectory.csv"), table)
    print(f"wrote {len(table.rows)} rows to {os.path.join(out, 'trajectory.csv')}")
    return EXIT_OK


def _write_mpc(spec, out):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BudgetExceeded)
        trajectory, schedule, result = harness.run_mpc(spec)
    harness.write_csv(os.path.join(out, "trajectory.csv"), trajectory)
    harness.write_csv(os.path.join(out, "schedule.csv"), schedule)
    final = result.states[-1]
    print(f"final phi = {final.phi:.6e} s = {final.s:.6e} at t = {final.t:g}")
    times = result.compute_time
    if times:
        print(f"compute time per period: max {max(times):.3e} s, mean {np.mean(times):.3e} s")
    overruns = [w for w in caught if issubclass(w.category, BudgetExceeded)]
    if overruns:
        print(f"{len(overruns)} periods exceeded the h budget")
    return EXIT_OK


def cmd_mpc(args):
    spec = _load(args, mode="mpc")
    _guard_stability(spec)
    return _write_mpc(spec, harness.ensure_dir(spec.out))


def cmd_stability(args):
    spec = _load(args)
    text, report, _ = harness.stability_report(spec)
    print(text, end="")
    if args.seed is not None:
        bad = harness.sample_gain_agreement(spec.params, spec.h, 200, args.seed)
        print(f"random_gain_triples = 200 disagreements = {len(bad)}")
    if args.out is not None or spec.out != ".":
        out = harness.ensure_dir(spec.out)
        with open(os.path.join(out, "stability.txt"), "w") as fh:
            fh.write(text)
    if spec.assert_stable and harness.is_unstable(report):
        raise CliFailure(EXIT_UNSTABLE, "Unstable",
                         f"spectral radius {report.spectral_radius:.6g}")
    return EXIT_OK


def cmd_match_check(args):
    spec = _load(args)
    out = harness.ensure_dir(spec.out)
    table, gap = harness.match_check(spec)
    harness.write_csv(os.path.join(out, "residuals.csv"), table)
    print(f"max |u_formula - u_oracle| = {table.column('u_gap').max():.3e}")
    print(f"max |w_formula - w_oracle| = {table.column('w_gap').max():.3e}")
    print(f"max trajectory gap = {gap:.3e}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dclag", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, extra in (("simulate", cmd_simulate, ("steps",)),
                            ("stability", cmd_stability, ("seed",)),
                            ("match-check", cmd_match_check, ("steps",)),
                            ("mpc", cmd_mpc, ("steps",))):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output directory")
        if "steps" in extra:
            p.add_argument("--steps", type=int, default=None,
                           help="number of steps (controller periods for mpc)")
        if "seed" in extra:
            p.add_argument("--seed", type=int, default=None,
                           help="seed for the randomized gain-condition check")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliFailure as exc:
        print(_fail_line(exc), file=sys.stderr)
        return exc.code
    except NonConvergence as exc:
        where = "" if exc.step_index is None else f" at step {exc.step_index}"
        print(_fail_line(CliFailure(EXIT_SOLVER, type(exc).__name__, f"{exc}{where}")),
              file=sys.stderr)
        return EXIT_SOLVER
    except ModelEvaluationError as exc:
        print(_fail_line(CliFailure(EXIT_SOLVER, "ModelEvaluationError", str(exc))),
              file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
