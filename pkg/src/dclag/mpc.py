"""Digital controller: sense, predict two steps with the forced DEL model, actuate.

The plant is the continuous cart-pendulum integrated with classical RK4 under a
piecewise-constant cart force. The controller only sees exact configurations at
multiples of ``h``. A constant force ``F`` on one step enters the discrete model
through the midpoint quadrature ``F1^d = F2^d = (h/2) F ds``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .controlled import ControlledLagrangian, Gains, control_impulse_u, dy_dphi
from .mechanics import ConfigPoint, DEFAULT_NEWTON, NonConvergence, step


class PlantState(NamedTuple):
    phi: float
    s: float
    phidot: float
    sdot: float
    t: float = 0.0

    @property
    def q(self):
        return ConfigPoint(self.phi, self.s)


class BudgetExceeded(RuntimeWarning):
    pass


# "continuous": matching force law at the predicted midpoint (stable)
# "impulse": discrete matching impulse on the predicted triple divided by h
REALIZATIONS = ("continuous", "impulse")


@dataclass(frozen=True)
class MpcConfig:
    h: float = 0.05
    T_f: float = 30.0
    plant_substeps: int = 50
    realtime_mode: bool = False
    realization: str = "continuous"

    def __post_init__(self):
        if self.realization not in REALIZATIONS:
            raise ValueError(f"realization must be one of {REALIZATIONS}")
        if not self.h > 0.0:
            raise ValueError("h must be positive")
        if self.plant_substeps < 1:
            raise ValueError("plant_substeps must be >= 1")
        n = self.T_f / self.h
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 3:
            raise ValueError("T_f must be a multiple of h covering at least 3 periods")

    @property
    def periods(self):
        return int(round(self.T_f / self.h))


@dataclass
class ControllerSchedule:
    h: float
    forces: list = field(default_factory=list)  # forces[j] acts on [j h, (j+1) h]

    def intervals(self):
        return [(j * self.h, (j + 1) * self.h, f) for j, f in enumerate(self.forces)]


@dataclass
class MpcResult:
    states: list            # PlantState sampled at t = j h, j = 0 .. periods
    schedule: ControllerSchedule
    compute_time: list      # seconds spent computing the force for interval j (j >= 2)
    predictions: list       # (k, q_bar_k, q_bar_{k+1}) for every controller period
    newton_iterations: list

    @property
    def q(self):
        return np.array([[st.phi, st.s] for st in self.states])

    @property
    def t(self):
        return np.array([st.t for st in self.states])


def _rhs(system, x, force):
    phi, s, phidot, sdot = x
    phi_dd, s_dd = system.continuous_accelerations(phi, s, phidot, sdot, force)
    return (phidot, sdot, phi_dd, s_dd)


def plant_advance(system, state: PlantState, force, duration, substeps=50) -> PlantState:
    """Classical RK4 over ``substeps`` equal substeps with a constant cart force."""
    if not duration > 0.0:
        raise ValueError("duration must be positive")
    dt = duration / substeps
    x = (state.phi, state.s, state.phidot, state.sdot)
    for _ in range(substeps):
        k1 = _rhs(system, x, force)
        k2 = _rhs(system, tuple(a + 0.5 * dt * b for a, b in zip(x, k1)), force)
        k3 = _rhs(system, tuple(a + 0.5 * dt * b for a, b in zip(x, k2)), force)
        k4 = _rhs(system, tuple(a + dt * b for a, b in zip(x, k3)), force)
        x = tuple(a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                  for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4))
    return PlantState(*x, state.t + duration)


def matching_force(system, gains: Gains, phi, s, phidot, sdot, h):
    """Cart force that makes the plant follow the controlled Lagrangian flow.

    Accelerations come from the controlled Euler-Lagrange equations with the
    damping force ``(2D/h) ydot grad y``; ``2D/h`` is the rate that the discrete
    dissipation term approximates. The force is the rate of change of the
    physical cart momentum plus the slope load.
    """
    lc = ControlledLagrangian(system, gains)
    m_pp, m_ps, m_ss, dm_pp, dm_ps = lc.mass_terms(phi)
    dl_phi, dl_s, _, _ = lc.partials(phi, s, phidot, sdot)
    slope = dy_dphi(system, gains, phi)
    damping = 2.0 * gains.D / h * (slope * phidot + sdot)
    r_phi = dl_phi - (dm_pp * phidot + dm_ps * sdot) * phidot + damping * slope
    r_s = dl_s - dm_ps * phidot * phidot + damping
    det = m_pp * m_ss - m_ps * m_ps
    if det == 0.0:
        raise ArithmeticError(f"controlled mass matrix singular at phi={phi:g}")
    phi_dd = (m_ss * r_phi - m_ps * r_s) / det
    s_dd = (m_pp * r_s - m_ps * r_phi) / det
    return (system.dbeta(phi) * phidot * phidot + system.beta(phi) * phi_dd
            + system.gamma * s_dd + system.dV2(s))


def control_force_from_prediction(system, gains: Gains, q_prev, q_bar_k, q_bar_k1, h,
                                  realization="continuous"):
    """Constant cart force for [kh, (k+1)h] from the predicted configurations.

    ``continuous`` evaluates :func:`matching_force` at the midpoint of
    ``q_bar_k, q_bar_k1`` with difference-quotient velocities. ``impulse`` uses
    ``-u_k / h`` on the triple ``(q_{k-1}, q_bar_k, q_bar_{k+1})``; it is kept
    for comparison and does not stabilize the plant.
    """
    if realization == "impulse":
        return -control_impulse_u(system, gains, q_prev, q_bar_k, q_bar_k1, h) / h
    if realization != "continuous":
        raise ValueError(f"unknown realization {realization!r}")
    return matching_force(system, gains,
                          0.5 * (q_bar_k[0] + q_bar_k1[0]), 0.5 * (q_bar_k[1] + q_bar_k1[1]),
                          (q_bar_k1[0] - q_bar_k[0]) / h, (q_bar_k1[1] - q_bar_k[1]) / h, h)


def _forced_step(system, q_prev, q_cur, h, f_before, f_after, settings):
    """DEL step with known constant forces on the two adjacent intervals.

    ``f_after`` may be a callable ``q_next -> force`` for an implicit force.
    """
    half = 0.5 * h

    def impulse(qp, qc, qn):
        fa = f_after(qn) if callable(f_after) else f_after
        return 0.0, half * (f_before + fa)
    return step(system, q_prev, q_cur, h, impulse, settings)


def predict_two_steps(system, h, q_km2, q_km1, forces, force_law=None, settings=DEFAULT_NEWTON):
    """Predict q_bar_k and q_bar_{k+1} from sensed q_{k-2}, q_{k-1}.

    ``forces`` holds the already scheduled (F_{k-2}, F_{k-1}). The force F_k on
    the interval being planned is ``force_law(q_{k-1}, q_bar_k, q_bar_{k+1})``
    solved implicitly with q_bar_{k+1}; without a law it is taken as zero.
    Returns ``(q_bar_k, q_bar_k1, F_k, newton_iterations)``.
    """
    f_km2, f_km1 = forces
    first = _forced_step(system, q_km2, q_km1, h, f_km2, f_km1, settings)
    q_bar_k = first.q
    if force_law is None:
        law = 0.0
    else:
        def law(q_next):
            return force_law(q_km1, q_bar_k, q_next)
    second = _forced_step(system, q_km1, q_bar_k, h, f_km1, law, settings)
    q_bar_k1 = second.q
    f_k = 0.0 if force_law is None else force_law(q_km1, q_bar_k, q_bar_k1)
    return q_bar_k, q_bar_k1, f_k, first.iterations + second.iterations


def run_digital_controller(system, gains: Gains, config: MpcConfig, initial: PlantState,
                           settings=DEFAULT_NEWTON) -> MpcResult:
    """Run the sense / predict / actuate loop up to ``T_f``.

    The cart is unforced on [0, 2h) while the first two configurations are
    sensed. For every k >= 2 the controller senses q_{k-1}, predicts
    q_bar_k and q_bar_{k+1}, and holds the resulting force on [kh, (k+1)h].
    """
    h, n = config.h, config.periods

    def law(q_prev, q_k, q_k1):
        return control_force_from_prediction(system, gains, q_prev, q_k, q_k1, h,
                                             config.realization)

    schedule = ControllerSchedule(h, [0.0, 0.0])
    states = [initial]
    compute, predictions, iterations = [], [], []
    states.append(plant_advance(system, initial, 0.0, h, config.plant_substeps))
    for k in range(2, n):
        started = time.perf_counter()
        sensed_km2, sensed_km1 = states[k - 2].q, states[k - 1].q
        try:
            q_bar_k, q_bar_k1, f_k, its = predict_two_steps(
                system, h, sensed_km2, sensed_km1,
                (schedule.forces[k - 2], schedule.forces[k - 1]), law, settings)
        except NonConvergence as exc:
            exc.step_index = k
            raise
        elapsed = time.perf_counter() - started
        if config.realtime_mode and elapsed > h:
            warnings.warn(f"period {k}: compute time {elapsed:.4f}s exceeds h={h}s",
                          BudgetExceeded, stacklevel=2)
        compute.append(elapsed)
        predictions.append((k, q_bar_k, q_bar_k1))
        iterations.append(its)
        schedule.forces.append(f_k)
        # the plant keeps running under F_{k-1} while the controller computes F_k
        states.append(plant_advance(system, states[k - 1], schedule.forces[k - 1], h,
                                    config.plant_substeps))
    states.append(plant_advance(system, states[n - 1], schedule.forces[n - 1], h,
                                config.plant_substeps))
    return MpcResult(states, schedule, compute, predictions, iterations)
