"""Pick the readings of u_k and w_k that agree with the matching oracles.

Simulates both sides of the matching from several initial offsets, compares
each candidate formula with its oracle and rewrites src/dclag/_matching.py.
"""

import argparse
import pathlib

from dclag import CartPendulumParams, ConfigPoint, Gains, QuadraticShaping, VelocityState
from dclag.controlled import resolve_matching_variant
from dclag.mechanics import initialize_from_velocity

TARGET = pathlib.Path(__file__).resolve().parents[1] / "src" / "dclag" / "_matching.py"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.05)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--dry-run", action="store_true")
    args = ap.parse_args()

    system = CartPendulumParams()
    gains = Gains(-0.1, -0.05, QuadraticShaping(-0.1))
    chosen = set()
    for phi0 in (0.05, 0.1, 0.2):
        q0 = ConfigPoint(phi0, 0.0)
        q1 = initialize_from_velocity(system, VelocityState(q0, (0.0, 0.0)), args.h)
        variant, w_form, gaps = resolve_matching_variant(system, gains, q0, q1, args.h, args.steps)
        print(f"phi0={phi0}: " + ", ".join(f"{k}={v:.3e}" for k, v in gaps.items()))
        chosen.add((variant, w_form))
    if len(chosen) != 1 or None in next(iter(chosen)):
        raise SystemExit(f"no consistent reading: {chosen}")
    variant, w_form = chosen.pop()
    text = ("# Generated by scripts/resolve_variant.py; do not edit by hand.\n"
            "# Readings of the matching formulas that agree with the matching oracles.\n"
            f'DEFAULT_VARIANT = "{variant}"\n'
            f'DEFAULT_W_FORM = "{w_form}"\n')
    print(f"selected u reading {variant!r}, w form {w_form!r}")
    if not args.dry_run:
        TARGET.write_text(text)
        print(f"wrote {TARGET}")


if __name__ == "__main__":
    main()
