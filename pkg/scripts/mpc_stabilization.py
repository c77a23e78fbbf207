"""Digital controller on the RK4 plant: sense, predict two steps, actuate."""

import argparse
import os

from dclag import harness
from _figures import load, plot, save

CONFIG = """
mode = mpc
sigma = -0.1
rho = -0.05
veps_curvature = -0.1
D = 0.005
phi0 = 0.1
T_f = 30
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--D", type=float, default=None)
    ap.add_argument("--realization", choices=("continuous", "impulse"), default="continuous")
    ap.add_argument("--out", default="figures/mpc_stabilization")
    args = ap.parse_args()
    import dataclasses
    spec = load(CONFIG, args.out, realization=args.realization)
    if args.D is not None:
        spec = dataclasses.replace(spec, gains=dataclasses.replace(spec.gains, D=args.D))
    trajectory, schedule, result = harness.run_mpc(spec)
    save(trajectory, args.out)
    save(schedule, args.out, "schedule.csv")
    final = result.states[-1]
    print(f"phi(T_f) = {final.phi:.3e} rad, s(T_f) = {final.s:.3e} m")
    plot(trajectory, os.path.join(args.out, "mpc_stabilization.png"),
         f"digital controller, D = {spec.gains.D:g}")


if __name__ == "__main__":
    main()
