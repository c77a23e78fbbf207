"""Closed loop without dissipation: the 0.1 rad offset keeps oscillating."""

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
D = 0
phi0 = 0.1
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--out", default="figures/sustained_oscillation")
    args = ap.parse_args()
    spec = load(CONFIG, args.out, steps=args.steps)
    table = harness.run_simulation(spec)
    save(table, args.out)
    phi, s = np.abs(table.column("phi")), np.abs(table.column("s"))
    print(f"sup|phi| = {phi.max():.4f} rad, sup|s| = {s.max():.4f} m over {args.steps} steps")
    shown = min(len(table.rows), 2000)
    plot(harness.Table(table.columns, table.rows[:shown]),
         os.path.join(args.out, "sustained_oscillation.png"), "closed loop, D = 0")


if __name__ == "__main__":
    main()
