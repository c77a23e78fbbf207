"""Experiment orchestration behind the command line: runs, reports, CSV output.

Trajectory rows are indexed by node ``k = 0 .. N``. ``u`` is the control applied
at node ``k`` (zero where none is applied: the first node, whose step comes
from the velocity initialization, and the last node). ``E`` is the discrete
energy of the step ``k -> k+1``; the last row repeats the final step's value.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .config import SimulationSpec
from .controlled import (ControlledLagrangian, Gains, QuadraticShaping, control_impulse_u,
                         discrete_energy, formula_sequence,
                         matching_oracle_u, matching_oracle_w, shape_correction_w,
                         simulate_closed_loop, simulate_controlled_side)
from .mechanics import (ConfigPoint, NonConvergence, VelocityState, initialize_from_velocity,
                        simulate)
from .mpc import PlantState, run_digital_controller
from .stability import (Classification, QuadraticControlledLagrangian, QuadraticEnergyForm,
                        check_gain_conditions, energy_definiteness, Definiteness,
                        quadratic_energy, simulate_linearized, stability_analysis)

TRAJECTORY_COLUMNS = ("k", "t", "phi", "s", "u", "E", "newton_iters")
SCHEDULE_COLUMNS = ("t_start", "t_end", "u_const")
RESIDUAL_COLUMNS = ("k", "u_formula", "u_oracle", "w_formula", "w_oracle", "u_gap", "w_gap")


@dataclass
class Table:
    columns: tuple
    rows: np.ndarray

    def column(self, name):
        return self.rows[:, self.columns.index(name)]


def _fmt(value):
    if float(value).is_integer() and abs(value) < 2 ** 53:
        return str(int(value))
    return "%.17g" % value


def write_csv(path, table: Table):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(table.columns) + "\n")
        for row in table.rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def initial_pair(spec: SimulationSpec, model=None, offset=(0.0, 0.0)):
    """(q0, q1) from the initial state; the first step is unforced."""
    model = spec.params if model is None else model
    q0 = ConfigPoint(spec.initial.q[0] - offset[0], spec.initial.q[1] - offset[1])
    try:
        q1 = initialize_from_velocity(model, VelocityState(q0, spec.initial.qdot), spec.h,
                                      settings=spec.newton)
    except NonConvergence as exc:
        exc.step_index = 1
        raise
    return q0, q1


def _table(h, q, u, energy, iterations):
    n = len(q)
    e = np.append(energy, energy[-1])
    k = np.arange(n)
    return Table(TRAJECTORY_COLUMNS,
                 np.column_stack([k, k * h, q[:, 0], q[:, 1], u, e, iterations]))


def _interior(values, n):
    out = np.zeros(n)
    out[1:-1] = values
    return out


def run_simulation(spec: SimulationSpec) -> Table:
    """Run a discrete-time mode (everything except ``mpc``)."""
    p, g, h, n = spec.params, spec.gains, spec.h, spec.steps
    if spec.mode == "mpc":
        return run_mpc(spec)[0]
    if spec.mode == "linearized":
        eq = (g.phi_e, g.s_e)
        model = QuadraticControlledLagrangian(p, g, h)
        z0, z1 = initial_pair(spec, model, offset=eq)
        traj = simulate_linearized(p, g, h, z0, z1, n, settings=spec.newton)
        form = model.form
        x = traj.q[:, 1] + form.x_slope * traj.q[:, 0]
        u = _interior(-g.D * (x[2:] - x[:-2]) / h, n + 1)
        energy = [quadratic_energy(form, traj.q[k], traj.q[k + 1]) for k in range(n)]
        q = traj.q + np.array(eq)
        return _table(h, q, u, np.array(energy), traj.iterations)
    q0, q1 = initial_pair(spec)
    if spec.mode == "unforced":
        traj = simulate(p, q0, q1, h, n, settings=spec.newton)
        u = np.zeros(n + 1)
        energy_model = p
    elif spec.mode == "closed_loop_discrete":
        traj = simulate_closed_loop(p, g, q0, q1, h, n, spec.variant, spec.newton)
        u = _interior(formula_sequence(control_impulse_u, traj, p, g, variant=spec.variant), n + 1)
        energy_model = ControlledLagrangian(p, g)
    elif spec.mode == "controlled_lagrangian_side":
        traj = simulate_controlled_side(p, g, q0, q1, h, n, settings=spec.newton)
        u = _interior(formula_sequence(shape_correction_w, traj, p, g), n + 1)
        energy_model = ControlledLagrangian(p, g)
    else:
        raise ValueError(f"unknown mode {spec.mode!r}")
    energy = np.array([discrete_energy(energy_model, traj.q[k], traj.q[k + 1], h)
                       for k in range(n)])
    return _table(h, traj.q, u, energy, traj.iterations)


def run_mpc(spec: SimulationSpec):
    """Digital controller run; returns (trajectory table, schedule table, result)."""
    p, g, h = spec.params, spec.gains, spec.h
    init = spec.initial
    result = run_digital_controller(
        p, g, spec.mpc_config(),
        PlantState(init.q[0], init.q[1], init.qdot[0], init.qdot[1]), spec.newton)
    q = result.q
    n = len(q) - 1
    lc = ControlledLagrangian(p, g)
    energy = np.array([discrete_energy(lc, q[k], q[k + 1], h) for k in range(n)])
    u = np.append(np.asarray(result.schedule.forces, dtype=float), 0.0)
    iters = np.zeros(n + 1)
    iters[2:2 + len(result.newton_iterations)] = result.newton_iterations
    schedule = Table(SCHEDULE_COLUMNS, np.array(result.schedule.intervals(), dtype=float))
    return _table(h, q, u, energy, iters), schedule, result


def match_check(spec: SimulationSpec):
    """Compare the u_k and w_k formulas with their oracles.

    u is checked along the controlled-side trajectory, w along the closed loop
    of the original system, both from the same (q0, q1). Returns the residual
    table and the largest pointwise gap between the two trajectories.
    """
    p, g, h, n = spec.params, spec.gains, spec.h, spec.steps
    q0, q1 = initial_pair(spec)
    ctrl = simulate_controlled_side(p, g, q0, q1, h, n, settings=spec.newton)
    orig = simulate_closed_loop(p, g, q0, q1, h, n, spec.variant, spec.newton)
    u_formula = formula_sequence(control_impulse_u, ctrl, p, g, variant=spec.variant)
    # the oracle is the full group left-hand side, which includes the damping term
    u_oracle = matching_oracle_u(ctrl, p, g)
    w_formula = formula_sequence(shape_correction_w, orig, p, g)
    w_oracle = matching_oracle_w(orig, p, g)
    k = np.arange(1, n)
    rows = np.column_stack([k, u_formula, u_oracle, w_formula, w_oracle,
                            np.abs(u_formula - u_oracle), np.abs(w_formula - w_oracle)])
    gap = float(np.max(np.abs(ctrl.q - orig.q)))
    return Table(RESIDUAL_COLUMNS, rows), gap


def stability_report(spec: SimulationSpec):
    """Return (report text, SpectralReport, GainConditions)."""
    p, g, h = spec.params, spec.gains, spec.h
    cond = check_gain_conditions(p, g)
    form = QuadraticEnergyForm.from_gains(p, g, h)
    rep = stability_analysis(p, g, h)
    lines = [f"sigma_lower_bound = {cond.sigma_lower:.17g}"]
    for name, margin in cond.margins.items():
        lines.append(f"condition [{name}] margin = {margin:.17g} "
                     f"{'holds' if cond.holds[name] else 'VIOLATED'}")
    if cond.violated():
        lines.append("violated = " + "; ".join(cond.violated()))
    for name in ("a_pp", "a_ps", "a_ss", "b_phi", "b_x", "x_slope"):
        lines.append(f"energy.{name} = {getattr(form, name):.17g}")
    lines.append(f"energy.definiteness = {energy_definiteness(form).value}")
    for i, lam in enumerate(rep.eigenvalues):
        lines.append(f"eigenvalue[{i}] = {lam.real:.17g} {lam.imag:+.17g}j "
                     f"|lambda| = {abs(lam):.17g}")
    lines.append(f"spectral_radius = {rep.spectral_radius:.17g}")
    lines.append(f"classification = {rep.classification.value}")
    return "\n".join(lines) + "\n", rep, cond


def sample_gain_agreement(system, h, count=200, seed=0):
    """Random (sigma, rho, Veps''(0)) triples; count where definiteness and inequalities disagree.

    sigma is drawn around the admissible interval so both outcomes occur.
    """
    rng = np.random.default_rng(seed)
    b0 = system.beta(0.0)
    lower = -b0 ** 2 / (system.alpha * system.gamma - b0 ** 2)
    disagreements = []
    for _ in range(count):
        sigma = rng.uniform(2.0 * lower, -lower)
        rho = rng.uniform(-1.0, 1.0)
        curv = rng.uniform(-1.0, 1.0)
        if sigma == 0.0 or rho == 0.0:
            continue
        gains = Gains(sigma, rho, QuadraticShaping(curv))
        form = QuadraticEnergyForm.from_gains(system, gains, h)
        by_form = energy_definiteness(form) is Definiteness.NEGATIVE_DEFINITE
        by_ineq = check_gain_conditions(system, gains).all_hold
        if by_form != by_ineq:
            disagreements.append((sigma, rho, curv))
    return disagreements


def is_unstable(report):
    return report.classification is Classification.UNSTABLE


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
