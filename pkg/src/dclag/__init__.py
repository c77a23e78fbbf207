"""Discrete controlled Lagrangians with potential shaping for the cart-pendulum."""

from .cart_pendulum import CartPendulumParams, ConstantCouplingSystem, free_particle
from .controlled import ControlledLagrangian, Gains, QuadraticShaping
from .mechanics import ConfigPoint, NewtonSettings, VelocityState

__all__ = [
    "CartPendulumParams",
    "ConfigPoint",
    "ConstantCouplingSystem",
    "ControlledLagrangian",
    "Gains",
    "NewtonSettings",
    "QuadraticShaping",
    "VelocityState",
    "free_particle",
]
