"""Cart-pendulum on an incline, plus a constant-coupling test system.

Both systems share one duck-typed surface used throughout the package:
``alpha``, ``gamma``, ``beta``/``dbeta``, ``V1``/``dV1``/``ddV1`` and
``V2``/``dV2``, together with the ``value``/``partials`` pair that makes them
usable as a Lagrangian model by :mod:`dclag.mechanics`.

The angle ``phi`` is measured from the upright vertical and ``s`` is the cart
position along the incline (increasing downhill).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SingularMassMatrix(ArithmeticError):
    pass


class _TwoDofLagrangian:
    """Shared kinetic-minus-potential machinery.

    L = 1/2 (alpha phidot^2 + 2 beta(phi) phidot sdot + gamma sdot^2) - V1(phi) - V2(s)
    """

    def value(self, phi, s, phidot, sdot):
        kinetic = 0.5 * (self.alpha * phidot * phidot
                         + 2.0 * self.beta(phi) * phidot * sdot
                         + self.gamma * sdot * sdot)
        return kinetic - self.V1(phi) - self.V2(s)

    def partials(self, phi, s, phidot, sdot):
        b = self.beta(phi)
        return (
            self.dbeta(phi) * phidot * sdot - self.dV1(phi),
            -self.dV2(s),
            self.alpha * phidot + b * sdot,
            b * phidot + self.gamma * sdot,
        )

    # aliases exposing the Lagrangian and its partials as plain functions of state
    def lagrangian(self, phi, s, phidot, sdot):
        return self.value(phi, s, phidot, sdot)

    def lagrangian_partials(self, phi, s, phidot, sdot):
        return self.partials(phi, s, phidot, sdot)

    def energy(self, phi, s, phidot, sdot):
        """Total mechanical energy T + V1 + V2."""
        kinetic = 0.5 * (self.alpha * phidot * phidot
                         + 2.0 * self.beta(phi) * phidot * sdot
                         + self.gamma * sdot * sdot)
        return kinetic + self.V1(phi) + self.V2(s)

    def continuous_accelerations(self, phi, s, phidot, sdot, force=0.0):
        """Solve the Euler-Lagrange equations for (phi_ddot, s_ddot).

        ``force`` acts on the cart coordinate ``s`` (newtons, positive downhill).
        """
        b = self.beta(phi)
        det = self.alpha * self.gamma - b * b
        if not det > 0.0:
            raise SingularMassMatrix(f"alpha*gamma - beta^2 = {det:g} at phi={phi:g}")
        r_phi = -self.dV1(phi)
        r_s = force - self.dV2(s) - self.dbeta(phi) * phidot * phidot
        phi_dd = (self.gamma * r_phi - b * r_s) / det
        s_dd = (self.alpha * r_s - b * r_phi) / det
        return phi_dd, s_dd


@dataclass(frozen=True)
class CartPendulumParams(_TwoDofLagrangian):
    """Physical constants of the cart-pendulum on an incline.

    Defaults are the experiment values: m = 0.14 kg, M = 0.44 kg, l = 0.215 m,
    psi = pi/9 rad, g = 9.81 m/s^2.
    """

    m: float = 0.14
    M: float = 0.44
    l: float = 0.215
    psi: float = math.pi / 9
    g: float = 9.81
    alpha: float = field(init=False, repr=False)
    gamma: float = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("m", "M", "l", "g"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not math.isfinite(self.psi):
            raise ValueError(f"psi must be finite, got {self.psi!r}")
        object.__setattr__(self, "alpha", self.m * self.l ** 2)
        object.__setattr__(self, "gamma", self.M + self.m)
        # |beta| peaks at m*l, so this is the worst case over all phi
        if not self.alpha * self.gamma - (self.m * self.l) ** 2 > 0.0:
            raise ValueError("mass matrix is not positive definite")

    @property
    def mgl(self):
        return self.m * self.g * self.l

    def beta(self, phi):
        return self.m * self.l * math.cos(phi - self.psi)

    def dbeta(self, phi):
        return -self.m * self.l * math.sin(phi - self.psi)

    def V1(self, phi):
        return self.mgl * math.cos(phi)

    def dV1(self, phi):
        return -self.mgl * math.sin(phi)

    def ddV1(self, phi):
        return -self.mgl * math.cos(phi)

    def V2(self, s):
        return -self.gamma * self.g * s * math.sin(self.psi)

    def dV2(self, s):
        return -self.gamma * self.g * math.sin(self.psi)

    def beta_integral(self, phi_a, phi_b):
        """Closed form of the integral of beta from phi_a to phi_b."""
        return self.m * self.l * (math.sin(phi_b - self.psi) - math.sin(phi_a - self.psi))


@dataclass(frozen=True)
class ConstantCouplingSystem(_TwoDofLagrangian):
    """Two-DOF system with a constant coupling coefficient ``beta0``.

    V1(phi) = mgl cos(phi), V2(s) = -slope_force * s. With ``beta0 = 0``,
    ``mgl = 0`` and ``slope_force = 0`` this is a free particle in the plane.
    """

    alpha: float = 1.0
    beta0: float = 0.0
    gamma: float = 1.0
    mgl: float = 0.0
    slope_force: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.gamma > 0.0
                and self.alpha * self.gamma - self.beta0 ** 2 > 0.0):
            raise ValueError("mass matrix is not positive definite")

    def beta(self, phi):
        return self.beta0

    def dbeta(self, phi):
        return 0.0

    def V1(self, phi):
        return self.mgl * math.cos(phi)

    def dV1(self, phi):
        return -self.mgl * math.sin(phi)

    def ddV1(self, phi):
        return -self.mgl * math.cos(phi)

    def V2(self, s):
        return -self.slope_force * s

    def dV2(self, s):
        return -self.slope_force

    def beta_integral(self, phi_a, phi_b):
        return self.beta0 * (phi_b - phi_a)


def free_particle():
    return ConstantCouplingSystem()


def mass_matrix(system, phi):
    b = system.beta(phi)
    return np.array([[system.alpha, b], [b, system.gamma]])
