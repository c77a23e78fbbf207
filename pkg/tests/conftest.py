import math

import pytest

from dclag import CartPendulumParams, ConfigPoint, Gains, QuadraticShaping, VelocityState
from dclag.mechanics import initialize_from_velocity

H = 0.05

ACCEPTANCE_LINES = []


@pytest.fixture
def params():
    return CartPendulumParams()


@pytest.fixture
def gains():
    """Reference gains inside the stability region, no dissipation."""
    return Gains(-0.1, -0.05, QuadraticShaping(-0.1))


def rest_pair(model, phi0, h=H, s0=0.0, qdot=(0.0, 0.0)):
    q0 = ConfigPoint(phi0, s0)
    return q0, initialize_from_velocity(model, VelocityState(q0, qdot), h)


def central_diff(f, x, i, eps=1e-6):
    xp = list(x)
    xm = list(x)
    xp[i] += eps
    xm[i] -= eps
    return (f(*xp) - f(*xm)) / (2.0 * eps)


def rel_close(a, b, rtol, floor=1e-8):
    return abs(a - b) <= rtol * max(abs(a), abs(b), floor)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


PI = math.pi
