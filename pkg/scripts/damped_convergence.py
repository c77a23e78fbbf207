"""Closed loop with dissipation emulation: the offset decays to the origin."""

import argparse
import os

import numpy as np

from dclag import harness
from _figures import load, plot, save

CONFIG = """
mode = closed_loop_discrete
sigma = -0.1
rho = -0.05
veps_curvature = -0.1
D = 0.005
phi0 = 0.1
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=10_000)
    ap.add_argument("--D", type=float, default=None)
    ap.add_argument("--out", default="figures/damped_convergence")
    args = ap.parse_args()
    spec = load(CONFIG, args.out, steps=args.steps)
    if args.D is not None:
        import dataclasses
        spec = dataclasses.replace(spec, gains=dataclasses.replace(spec.gains, D=args.D))
    table = harness.run_simulation(spec)
    save(table, args.out)
    a = np.maximum(np.abs(table.column("phi")), np.abs(table.column("s")))
    outside = np.nonzero(a >= 1e-3)[0]
    settle = 0 if len(outside) == 0 else int(outside[-1]) + 1
    print(f"inside 1e-3 from step {settle} (t = {settle * spec.h:g} s)")
    shown = min(len(table.rows), max(2000, 2 * settle))
    plot(harness.Table(table.columns, table.rows[:shown]),
         os.path.join(args.out, "damped_convergence.png"), f"closed loop, D = {spec.gains.D:g}")


if __name__ == "__main__":
    main()
