"""Shared helpers for the figure scripts: run a config, save CSV and an optional plot."""

import os

from dclag import harness
from dclag.config import parse_config


def load(text, out, **changes):
    import dataclasses
    spec = parse_config(text)
    return dataclasses.replace(spec, out=out, **changes)


def plot(table, path, title):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping plot")
        return
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    t = table.column("t")
    axes[0].plot(t, table.column("phi"))
    axes[0].set_ylabel("phi [rad]")
    axes[1].plot(t, table.column("s"))
    axes[1].set_ylabel("s [m]")
    axes[1].set_xlabel("t [s]")
    axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    print(f"wrote {path}")


def save(table, out, name="trajectory.csv"):
    harness.ensure_dir(out)
    path = os.path.join(out, name)
    harness.write_csv(path, table)
    print(f"wrote {path}")
