"""Midpoint variational integrator for two-DOF (phi, s) systems.

The discrete Lagrangian is ``Ld(qa, qb) = h * L((qa + qb)/2, (qb - qa)/h)``.
A *model* is any object with

    value(phi, s, phidot, sdot) -> float
    partials(phi, s, phidot, sdot) -> (dL/dphi, dL/ds, dL/dphidot, dL/dsdot)

Forced steps take an ``impulse`` callable ``(q_prev, q_cur, q_next) -> (f_phi, f_s)``
that is added to the discrete Euler-Lagrange residual, so a generalized force
that must vanish as ``D1 Ld + D2 Ld = u`` is supplied as ``-u``. The callable
sees the current Newton iterate for ``q_next``, which lets implicit control
laws be solved inside the same iteration.

Hot paths use plain floats; numpy only appears at trajectory level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np


class ConfigPoint(NamedTuple):
    phi: float
    s: float


class VelocityState(NamedTuple):
    q: ConfigPoint
    qdot: tuple  # (phidot, sdot)


class ModelEvaluationError(ArithmeticError):
    pass


class NonConvergence(RuntimeError):
    def __init__(self, message, iterations=None, residual_norm=None, step_index=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual_norm = residual_norm
        self.step_index = step_index


class SingularJacobian(NonConvergence):
    def __init__(self, message, condition=None, **kwargs):
        super().__init__(message, **kwargs)
        self.condition = condition


@dataclass(frozen=True)
class NewtonSettings:
    residual_tolerance: float = 1e-12
    max_iterations: int = 50
    jacobian_fd_step: float = 1e-7

    def __post_init__(self):
        if not self.residual_tolerance > 0.0:
            raise ValueError("residual_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.jacobian_fd_step > 0.0:
            raise ValueError("jacobian_fd_step must be positive")


DEFAULT_NEWTON = NewtonSettings()
_ROUNDOFF = 32.0 * 2.220446049250313e-16

Impulse = Callable[[ConfigPoint, ConfigPoint, ConfigPoint], Sequence[float]]


class StepResult(NamedTuple):
    q: ConfigPoint
    iterations: int
    residual_norm: float


def _check_h(h):
    if not (h > 0.0 and math.isfinite(h)):
        raise ValueError(f"time step must be positive and finite, got {h!r}")


def _midpoint_state(qa, qb, h):
    return (0.5 * (qa[0] + qb[0]), 0.5 * (qa[1] + qb[1]),
            (qb[0] - qa[0]) / h, (qb[1] - qa[1]) / h)


def discrete_lagrangian(model, q_a, q_b, h):
    _check_h(h)
    value = h * model.value(*_midpoint_state(q_a, q_b, h))
    if not math.isfinite(value):
        raise ModelEvaluationError(f"non-finite discrete Lagrangian between {q_a} and {q_b}")
    return value


def slot_derivatives(model, q_a, q_b, h):
    """Return ``(D1 Ld, D2 Ld)`` as two 2-tuples, sharing one partials call."""
    dphi, ds, dphidot, dsdot = model.partials(*_midpoint_state(q_a, q_b, h))
    half = 0.5 * h
    d1 = (half * dphi - dphidot, half * ds - dsdot)
    d2 = (half * dphi + dphidot, half * ds + dsdot)
    if not all(math.isfinite(x) for x in d1 + d2):
        raise ModelEvaluationError(f"non-finite partials between {q_a} and {q_b}")
    return d1, d2


def d1_Ld(model, q_a, q_b, h):
    _check_h(h)
    return np.array(slot_derivatives(model, q_a, q_b, h)[0])


def d2_Ld(model, q_a, q_b, h):
    _check_h(h)
    return np.array(slot_derivatives(model, q_a, q_b, h)[1])


def discrete_momentum(model, q_a, q_b, h):
    """Cart component of ``D2 Ld(q_a, q_b)``; conserved when the potential is s-invariant."""
    _check_h(h)
    return slot_derivatives(model, q_a, q_b, h)[1][1]


def del_residual(model, q_prev, q_cur, q_next, h, impulse=(0.0, 0.0)):
    """Forced discrete Euler-Lagrange residual ``D1 Ld(cur, next) + D2 Ld(prev, cur) + impulse``."""
    _check_h(h)
    d1 = slot_derivatives(model, q_cur, q_next, h)[0]
    d2 = slot_derivatives(model, q_prev, q_cur, h)[1]
    if callable(impulse):
        impulse = impulse(q_prev, q_cur, q_next)
    return np.array([d1[0] + d2[0] + impulse[0], d1[1] + d2[1] + impulse[1]])


def newton_solve(residual, guess, settings=DEFAULT_NEWTON):
    """Solve a 2x2 nonlinear system with a forward-difference Jacobian."""
    x0, x1 = float(guess[0]), float(guess[1])
    r0, r1 = residual(x0, x1)
    norm = math.hypot(r0, r1)
    iterations = 0
    fd = settings.jacobian_fd_step
    while not norm <= settings.residual_tolerance:
        if iterations >= settings.max_iterations or not math.isfinite(norm):
            raise NonConvergence(
                f"Newton failed after {iterations} iterations, residual {norm:.3e}",
                iterations=iterations, residual_norm=norm)
        e0 = fd * max(1.0, abs(x0))
        e1 = fd * max(1.0, abs(x1))
        a0, a1 = residual(x0 + e0, x1)
        b0, b1 = residual(x0, x1 + e1)
        j00, j10 = (a0 - r0) / e0, (a1 - r1) / e0
        j01, j11 = (b0 - r0) / e1, (b1 - r1) / e1
        det = j00 * j11 - j01 * j10
        scale = max(abs(j00), abs(j01), abs(j10), abs(j11))
        if scale == 0.0 or abs(det) <= 1e-14 * scale * scale:
            cond = math.inf if det == 0.0 else scale * scale / abs(det)
            raise SingularJacobian(
                f"singular Newton Jacobian (condition ~{cond:.3e})",
                condition=cond, iterations=iterations, residual_norm=norm)
        dx0 = (j11 * r0 - j01 * r1) / det
        dx1 = (j00 * r1 - j10 * r0) / det
        x0 -= dx0
        x1 -= dx1
        iterations += 1
        r0, r1 = residual(x0, x1)
        norm = math.hypot(r0, r1)
        # roundoff floor: the correction no longer moves the iterate
        if (abs(dx0) <= _ROUNDOFF * max(1.0, abs(x0))
                and abs(dx1) <= _ROUNDOFF * max(1.0, abs(x1))):
            break
    return StepResult(ConfigPoint(x0, x1), iterations, norm)


def step(model, q_prev, q_cur, h, impulse: Optional[Impulse] = None, settings=DEFAULT_NEWTON):
    """Advance the update map ``(q_prev, q_cur) -> q_next`` by Newton iteration.

    The initial guess is the constant-velocity extrapolation ``2 q_cur - q_prev``.
    """
    _check_h(h)
    q_prev = ConfigPoint(*q_prev)
    q_cur = ConfigPoint(*q_cur)
    d2 = slot_derivatives(model, q_prev, q_cur, h)[1]

    def residual(phi, s):
        q_next = ConfigPoint(phi, s)
        d1 = slot_derivatives(model, q_cur, q_next, h)[0]
        r0 = d1[0] + d2[0]
        r1 = d1[1] + d2[1]
        if impulse is not None:
            f = impulse(q_prev, q_cur, q_next)
            r0 += f[0]
            r1 += f[1]
        return r0, r1

    guess = (2.0 * q_cur[0] - q_prev[0], 2.0 * q_cur[1] - q_prev[1])
    return newton_solve(residual, guess, settings)


def initialize_from_velocity(model, v0: VelocityState, h, force=None, settings=DEFAULT_NEWTON):
    """Find q1 from (q0, qdot0) via ``dL/dqdot(q0, qdot0) + D1 Ld(q0, q1) + F1(q0, q1) = 0``.

    ``force`` is an optional callable ``(q0, q1) -> (f_phi, f_s)``.
    """
    _check_h(h)
    q0 = ConfigPoint(*v0.q)
    phidot0, sdot0 = v0.qdot
    p = model.partials(q0[0], q0[1], phidot0, sdot0)
    p_phi, p_s = p[2], p[3]

    def residual(phi, s):
        q1 = ConfigPoint(phi, s)
        d1 = slot_derivatives(model, q0, q1, h)[0]
        r0 = p_phi + d1[0]
        r1 = p_s + d1[1]
        if force is not None:
            f = force(q0, q1)
            r0 += f[0]
            r1 += f[1]
        return r0, r1

    guess = (q0[0] + h * phidot0, q0[1] + h * sdot0)
    return newton_solve(residual, guess, settings).q


@dataclass
class DiscreteTrajectory:
    h: float
    q: np.ndarray           # (N+1, 2) columns phi, s
    iterations: np.ndarray  # Newton iterations used to produce each q_k (0 for k < 2)

    @property
    def t(self):
        return self.h * np.arange(len(self.q))

    @property
    def phi(self):
        return self.q[:, 0]

    @property
    def s(self):
        return self.q[:, 1]

    def point(self, k):
        return ConfigPoint(float(self.q[k, 0]), float(self.q[k, 1]))


def simulate(model, q0, q1, h, steps, impulse: Optional[Impulse] = None,
             settings=DEFAULT_NEWTON):
    """Iterate the (forced) update map ``steps - 1`` times from ``(q0, q1)``.

    Returns a trajectory with ``steps + 1`` configurations ``q_0 .. q_steps``.
    """
    _check_h(h)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    q = np.empty((steps + 1, 2))
    iters = np.zeros(steps + 1, dtype=int)
    q[0] = q0
    q[1] = q1
    prev, cur = ConfigPoint(*q0), ConfigPoint(*q1)
    for k in range(2, steps + 1):
        try:
            res = step(model, prev, cur, h, impulse, settings)
        except NonConvergence as exc:
            exc.step_index = k
            raise
        q[k] = res.q
        iters[k] = res.iterations
        prev, cur = cur, res.q
    return DiscreteTrajectory(h, q, iters)
