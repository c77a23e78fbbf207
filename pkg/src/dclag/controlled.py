"""Potential shaping for the discrete controlled Lagrangian.

Notation follows the two-DOF setting: ``phi`` is the shape variable, ``s`` the
directly actuated group variable, ``k(phi) = -beta(phi) / (sigma gamma)`` and

    y = s - (1/gamma) (1/sigma - (rho - 1)/rho) * integral_{phi_e}^{phi} beta

is the symmetry-breaking variable on which the shaping potential acts.

Sign conventions. ``u_k`` sits on the right-hand side of the discrete group
equation ``dLd/ds_k + dLd/ds_k = u_k``; the physical cart force it stands for
is ``-u_k / h``. ``w_k`` sits on the right-hand side of the controlled shape
equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import _matching
from .mechanics import DEFAULT_NEWTON, simulate, slot_derivatives

MatchingVariant = Literal["y_midpoint", "s_midpoint"]
WForm = Literal["derived", "printed"]

VARIANTS = ("y_midpoint", "s_midpoint")
W_FORMS = ("derived", "printed")


@dataclass(frozen=True)
class QuadraticShaping:
    """V(y) = 1/2 * curvature * (y - center)^2."""

    curvature: float
    center: float = 0.0

    def value(self, y):
        d = y - self.center
        return 0.5 * self.curvature * d * d

    def derivative(self, y):
        return self.curvature * (y - self.center)

    @property
    def second_derivative_at_0(self):
        return self.curvature


@dataclass(frozen=True)
class Gains:
    sigma: float
    rho: float
    veps: QuadraticShaping = field(default_factory=lambda: QuadraticShaping(0.0))
    D: float = 0.0
    phi_e: float = 0.0
    s_e: float = 0.0  # target cart position; the shaping potential acts on y - s_e

    def __post_init__(self):
        if self.sigma == 0.0 or self.rho == 0.0:
            raise ValueError("sigma and rho must be nonzero")

    @property
    def shape_factor(self):
        """1 - sigma + sigma/rho, the common factor of dy/dphi and w_k."""
        return 1.0 - self.sigma + self.sigma / self.rho


def k_of_phi(system, gains, phi):
    return -system.beta(phi) / (gains.sigma * system.gamma)


def dk_of_phi(system, gains, phi):
    return -system.dbeta(phi) / (gains.sigma * system.gamma)


def y_coefficient(system, gains):
    return (1.0 / gains.sigma - (gains.rho - 1.0) / gains.rho) / system.gamma


def y_of(system, gains, phi, s):
    return s - y_coefficient(system, gains) * system.beta_integral(gains.phi_e, phi)


def dy_dphi(system, gains, phi):
    return -y_coefficient(system, gains) * system.beta(phi)


class ControlledLagrangian:
    """Lagrangian model of the closed loop.

    Lc = L(phi, s, phidot, sdot + k phidot) + 1/2 sigma gamma (k phidot)^2
         + 1/2 (rho - 1) gamma (sdot - (sigma - 1) k phidot)^2 + V2(s) - Veps(y)

    The last kinetic term uses ``sdot - (sigma-1) k phidot``, the form for which
    dLc/dsdot equals ``rho gamma (sdot - (sigma-1) k phidot)``.
    """

    def __init__(self, system, gains):
        self.system = system
        self.gains = gains

    def mass_terms(self, phi):
        """Controlled mass matrix entries (M_pp, M_ps, M_ss) and their phi-derivatives."""
        sy, g = self.system, self.gains
        ga, sig, rho = sy.gamma, g.sigma, g.rho
        b, db = sy.beta(phi), sy.dbeta(phi)
        k, dk = k_of_phi(sy, g, phi), dk_of_phi(sy, g, phi)
        cpp = (1.0 + sig) * ga + (rho - 1.0) * ga * (sig - 1.0) ** 2
        cps = ga * (1.0 - (rho - 1.0) * (sig - 1.0))
        m_pp = sy.alpha + 2.0 * b * k + cpp * k * k
        m_ps = b + cps * k
        dm_pp = 2.0 * (db * k + b * dk) + 2.0 * cpp * k * dk
        dm_ps = db + cps * dk
        return m_pp, m_ps, rho * ga, dm_pp, dm_ps

    def value(self, phi, s, phidot, sdot):
        sy, g = self.system, self.gains
        k = k_of_phi(sy, g, phi)
        kp = k * phidot
        return (sy.value(phi, s, phidot, sdot + kp)
                + 0.5 * g.sigma * sy.gamma * kp * kp
                + 0.5 * (g.rho - 1.0) * sy.gamma * (sdot - (g.sigma - 1.0) * kp) ** 2
                + sy.V2(s) - g.veps.value(y_of(sy, g, phi, s) - g.s_e))

    def partials(self, phi, s, phidot, sdot):
        sy, g = self.system, self.gains
        m_pp, m_ps, m_ss, dm_pp, dm_ps = self.mass_terms(phi)
        dv = g.veps.derivative(y_of(sy, g, phi, s) - g.s_e)
        return (
            0.5 * dm_pp * phidot * phidot + dm_ps * phidot * sdot
            - sy.dV1(phi) - dv * dy_dphi(sy, g, phi),
            -dv,
            m_pp * phidot + m_ps * sdot,
            m_ps * phidot + m_ss * sdot,
        )


def controlled_lagrangian_value(system, gains, phi, s, phidot, sdot):
    return ControlledLagrangian(system, gains).value(phi, s, phidot, sdot)


def J_k(system, gains, q_a, q_b, h):
    """Controlled group momentum on the step ``q_a -> q_b``."""
    phi_mid = 0.5 * (q_a[0] + q_b[0])
    k = k_of_phi(system, gains, phi_mid)
    return gains.rho * system.gamma * (
        (q_b[1] - q_a[1]) / h - (gains.sigma - 1.0) * k * (q_b[0] - q_a[0]) / h)


def _shaping_slope(system, gains, q_a, q_b, variant):
    phi_mid = 0.5 * (q_a[0] + q_b[0])
    s_mid = 0.5 * (q_a[1] + q_b[1])
    if variant == "y_midpoint":
        return gains.veps.derivative(y_of(system, gains, phi_mid, s_mid) - gains.s_e)
    if variant == "s_midpoint":
        return gains.veps.derivative(s_mid - gains.s_e)
    raise ValueError(f"unknown matching variant {variant!r}")


def matching_impulse_u(system, gains, q_prev, q_cur, q_next, h,
                       variant: MatchingVariant = _matching.DEFAULT_VARIANT):
    """Matching impulse u_k without the dissipation term."""
    if not h > 0.0:
        raise ValueError("h must be positive")
    sp_ = 0.5 * (q_cur[1] + q_next[1])
    sm_ = 0.5 * (q_prev[1] + q_cur[1])
    dphi_p = q_next[0] - q_cur[0]
    dphi_m = q_cur[0] - q_prev[0]
    kp = k_of_phi(system, gains, 0.5 * (q_cur[0] + q_next[0]))
    km = k_of_phi(system, gains, 0.5 * (q_prev[0] + q_cur[0]))
    vp = _shaping_slope(system, gains, q_cur, q_next, variant)
    vm = _shaping_slope(system, gains, q_prev, q_cur, variant)
    return (-0.5 * h * (system.dV2(sp_) + system.dV2(sm_))
            + 0.5 * h / gains.rho * (vp + vm)
            + system.gamma * (dphi_p * kp - dphi_m * km) / h)


def dissipation_impulse(system, gains, q_prev, q_cur, q_next, h):
    """Dissipation-emulating part of u_k, ``-(D/rho) (y_{k+1} - y_{k-1}) / h``.

    The 1/rho makes the term appear as ``-D (dy_{k-1} + dy_k) / h`` in the
    controlled group equation, so D > 0 removes controlled energy.
    """
    if gains.D == 0.0:
        return 0.0
    dy = y_of(system, gains, *q_next) - y_of(system, gains, *q_prev)
    return -gains.D / gains.rho * dy / h


def control_impulse_u(system, gains, q_prev, q_cur, q_next, h,
                      variant: MatchingVariant = _matching.DEFAULT_VARIANT):
    return (matching_impulse_u(system, gains, q_prev, q_cur, q_next, h, variant)
            + dissipation_impulse(system, gains, q_prev, q_cur, q_next, h))


def shape_correction_w(system, gains, q_prev, q_cur, q_next, h,
                       form: WForm = _matching.DEFAULT_W_FORM):
    """Extra term of the controlled shape equation.

    ``form="derived"`` is the expression obtained from the midpoint discrete
    Lagrangians directly; ``form="printed"`` reproduces the published
    expression term by term, kept for comparison by the matching oracle.
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    c = gains.shape_factor
    phi_p = 0.5 * (q_cur[0] + q_next[0])
    phi_m = 0.5 * (q_prev[0] + q_cur[0])
    dphi_p = q_next[0] - q_cur[0]
    dphi_m = q_cur[0] - q_prev[0]
    kp, km = k_of_phi(system, gains, phi_p), k_of_phi(system, gains, phi_m)
    dkp, dkm = dk_of_phi(system, gains, phi_p), dk_of_phi(system, gains, phi_m)
    jp = J_k(system, gains, q_cur, q_next, h)
    jm = J_k(system, gains, q_prev, q_cur, h)
    vp = _shaping_slope(system, gains, q_cur, q_next, "y_midpoint")
    vm = _shaping_slope(system, gains, q_prev, q_cur, "y_midpoint")
    if form == "derived":
        return c * (0.5 * dkp * jp * dphi_p + 0.5 * dkm * jm * dphi_m
                    - kp * (jp + 0.5 * h * vp) + km * (jm - 0.5 * h * vm))
    if form == "printed":
        gr = system.gamma * gains.rho
        return -c * (kp * (-gr * jp + 0.5 * h * vp) + km * (gr * jm + 0.5 * h * vm)
                     - dkp * jp * dphi_p - dkm * jm * dphi_m)
    raise ValueError(f"unknown w form {form!r}")


def simulate_closed_loop(system, gains, q0, q1, h, steps,
                         variant: MatchingVariant = _matching.DEFAULT_VARIANT,
                         settings=DEFAULT_NEWTON):
    """Original Lagrangian, unforced shape equation, group equation forced by u_k."""
    def impulse(q_prev, q_cur, q_next):
        return 0.0, -control_impulse_u(system, gains, q_prev, q_cur, q_next, h, variant)
    return simulate(system, q0, q1, h, steps, impulse, settings)


def simulate_controlled_side(system, gains, q0, q1, h, steps,
                             form: WForm = _matching.DEFAULT_W_FORM,
                             settings=DEFAULT_NEWTON):
    """Controlled Lagrangian with w_k on the shape equation.

    With dissipation the group equation carries ``rho`` times the dissipation
    impulse, the image of the u-side term under matching.
    """
    model = ControlledLagrangian(system, gains)

    def impulse(q_prev, q_cur, q_next):
        w = shape_correction_w(system, gains, q_prev, q_cur, q_next, h, form)
        d = dissipation_impulse(system, gains, q_prev, q_cur, q_next, h)
        return -w, -gains.rho * d
    return simulate(model, q0, q1, h, steps, impulse, settings)


def _del_lhs(model, traj, component):
    q = traj.q
    out = np.empty(len(q) - 2)
    for k in range(1, len(q) - 1):
        d1 = slot_derivatives(model, q[k], q[k + 1], traj.h)[0]
        d2 = slot_derivatives(model, q[k - 1], q[k], traj.h)[1]
        out[k - 1] = d1[component] + d2[component]
    return out


def matching_oracle_u(trajectory, system, gains):
    """Left side of the original group equation at k = 1 .. N-1.

    Along a controlled-side trajectory this is the impulse that the original
    system needs in order to follow it.
    """
    return _del_lhs(system, trajectory, 1)


def matching_oracle_w(trajectory, system, gains):
    """Left side of the controlled shape equation at k = 1 .. N-1.

    Along a trajectory of the original system forced by u_k this is the shape
    correction the controlled system needs in order to follow it.
    """
    return _del_lhs(ControlledLagrangian(system, gains), trajectory, 0)


def formula_sequence(fn, trajectory, system, gains, **kwargs):
    q = trajectory.q
    return np.array([fn(system, gains, q[k - 1], q[k], q[k + 1], trajectory.h, **kwargs)
                     for k in range(1, len(q) - 1)])


def resolve_matching_variant(system, gains, q0, q1, h, steps=200, tol=1e-9):
    """Pick the u_k and w_k readings that agree with the matching oracles.

    Returns ``(variant, w_form, gaps)``, where ``gaps`` maps every candidate to
    its worst relative disagreement. ``None`` is returned for a slot with no
    candidate under ``tol``.
    """
    undamped = Gains(gains.sigma, gains.rho, gains.veps, 0.0, gains.phi_e, gains.s_e)
    gaps = {}
    ctrl = simulate_controlled_side(system, undamped, q0, q1, h, steps, form="derived")
    oracle = matching_oracle_u(ctrl, system, undamped)
    for v in VARIANTS:
        u = formula_sequence(matching_impulse_u, ctrl, system, undamped, variant=v)
        gaps[v] = float(np.max(np.abs(u - oracle) / np.maximum(1.0, np.abs(oracle))))
    variant = min(VARIANTS, key=gaps.get)
    orig = simulate_closed_loop(system, undamped, q0, q1, h, steps, variant=variant)
    w_oracle = matching_oracle_w(orig, system, undamped)
    for f in W_FORMS:
        w = formula_sequence(shape_correction_w, orig, system, undamped, form=f)
        gaps[f] = float(np.max(np.abs(w - w_oracle) / np.maximum(1.0, np.abs(w_oracle))))
    w_form = min(W_FORMS, key=gaps.get)
    return (variant if gaps[variant] <= tol else None,
            w_form if gaps[w_form] <= tol else None, gaps)


def discrete_energy(model_or_system, q_a, q_b, h):
    """Energy of a two-DOF model at the step midpoint, T + V from value/partials.

    For L = T - V quadratic in velocities, T = 1/2 v . dL/dv.
    """
    phi, s, phidot, sdot = (0.5 * (q_a[0] + q_b[0]), 0.5 * (q_a[1] + q_b[1]),
                            (q_b[0] - q_a[0]) / h, (q_b[1] - q_a[1]) / h)
    p = model_or_system.partials(phi, s, phidot, sdot)
    kinetic = 0.5 * (phidot * p[2] + sdot * p[3])
    return 2.0 * kinetic - model_or_system.value(phi, s, phidot, sdot)
