import math

import numpy as np
import pytest
from scipy.integrate import quad

from dclag import ConfigPoint, ConstantCouplingSystem, Gains, QuadraticShaping
from dclag import _matching
from dclag.controlled import (ControlledLagrangian, J_k, control_impulse_u, controlled_lagrangian_value,
                              dk_of_phi, formula_sequence, k_of_phi, matching_impulse_u,
                              matching_oracle_u, matching_oracle_w, resolve_matching_variant,
                              shape_correction_w, simulate_closed_loop, simulate_controlled_side,
                              y_coefficient, y_of)
from dclag.mechanics import DiscreteTrajectory, del_residual
from dclag.mpc import matching_force

from conftest import H, central_diff, rel_close, rest_pair

GRAVITY_IMPULSE = H * 0.58 * 9.81 * math.sin(math.pi / 9)


def constant_trajectory(q, steps=20, h=H):
    return DiscreteTrajectory(h, np.tile(np.asarray(q, float), (steps + 1, 1)),
                              np.zeros(steps + 1, dtype=int))


def test_k_examples(params, gains):
    assert k_of_phi(params, gains, params.psi) == pytest.approx(0.14 * 0.215 / (0.1 * 0.58), rel=1e-14)
    assert k_of_phi(params, gains, params.psi) == pytest.approx(0.518966, abs=1e-6)
    assert k_of_phi(params, gains, params.psi + math.pi / 2) == pytest.approx(0.0, abs=1e-16)


def test_dk_matches_finite_difference(params, gains):
    for phi in np.random.default_rng(0).uniform(-3, 3, 100):
        fd = central_diff(lambda x: k_of_phi(params, gains, x), [phi], 0)
        assert fd == pytest.approx(dk_of_phi(params, gains, phi), abs=1e-8)


def test_y_at_equilibrium_angle(params, gains):
    assert y_of(params, gains, gains.phi_e, 0.37) == 0.37


def test_y_matches_quadrature(params):
    g = Gains(-0.1, -0.05, QuadraticShaping(-0.1), phi_e=0.2)
    coef = y_coefficient(params, g)
    for phi in np.random.default_rng(5).uniform(-3, 3, 100):
        integral, _ = quad(params.beta, g.phi_e, phi, epsabs=1e-14, epsrel=1e-14)
        assert y_of(params, g, phi, 0.4) == pytest.approx(0.4 - coef * integral, abs=1e-10)


def test_y_reduces_to_s_when_coefficient_vanishes(params):
    rho = -1.0
    g = Gains(rho / (rho - 1.0), rho, QuadraticShaping(-0.1))
    for phi in (-1.0, 0.3, 2.0):
        assert y_of(params, g, phi, 0.8) == pytest.approx(0.8, abs=1e-15)


def test_controlled_lagrangian_degenerate_gains():
    system = ConstantCouplingSystem(alpha=0.7, beta0=0.0, gamma=1.3, mgl=0.4, slope_force=2.0)
    g = Gains(1.0, 1.0, QuadraticShaping(0.0))
    for state in np.random.default_rng(2).uniform(-1, 1, (20, 4)):
        lc = controlled_lagrangian_value(system, g, *state)
        assert lc == pytest.approx(system.value(*state) + system.V2(state[1]), rel=1e-13, abs=1e-15)


def test_controlled_lagrangian_partials(params):
    rng = np.random.default_rng(9)
    for sigma, rho, c in ((-0.1, -0.05, -0.1), (0.3, 2.0, 0.5), (-0.2, -0.7, -1.0)):
        lc = ControlledLagrangian(params, Gains(sigma, rho, QuadraticShaping(c), phi_e=0.1, s_e=0.2))
        for _ in range(30):
            x = rng.uniform(-1.5, 1.5, 4)
            exact = lc.partials(*x)
            for i in range(4):
                assert rel_close(central_diff(lc.value, x, i), exact[i], 1e-6)


def test_controlled_lagrangian_momentum_in_group_direction(params, gains):
    # dLc/dsdot equals rho gamma (sdot - (sigma - 1) k phidot)
    lc = ControlledLagrangian(params, gains)
    phi, phidot, sdot = 0.2, 0.7, -0.3
    k = k_of_phi(params, gains, phi)
    expected = gains.rho * params.gamma * (sdot - (gains.sigma - 1.0) * k * phidot)
    assert lc.partials(phi, 0.0, phidot, sdot)[3] == pytest.approx(expected, rel=1e-13)


def test_controlled_lagrangian_at_equilibrium_rest(params, gains):
    value = controlled_lagrangian_value(params, gains, 0.0, 0.0, 0.0, 0.0)
    assert value == pytest.approx(-params.V1(0.0), rel=1e-14)
    assert value == pytest.approx(-0.295279, rel=1e-4)


def test_J_examples(params, gains):
    q = ConfigPoint(0.2, 0.1)
    assert J_k(params, gains, q, q, H) == 0.0
    assert J_k(params, gains, ConfigPoint(0.3, 0.0), ConfigPoint(0.3, 0.01), 0.05) == pytest.approx(-0.0058)
    g1 = Gains(1.0, -0.05, QuadraticShaping(-0.1))
    a, b = ConfigPoint(0.1, 0.0), ConfigPoint(0.4, 0.02)
    assert J_k(params, g1, a, b, H) == pytest.approx(g1.rho * params.gamma * 0.02 / H)


def test_u_at_equilibrium(params, gains):
    o = ConfigPoint(0.0, 0.0)
    u = control_impulse_u(params, gains, o, o, o, H)
    assert u == pytest.approx(GRAVITY_IMPULSE, rel=1e-14)
    assert u == pytest.approx(0.097310, rel=1e-4)


def test_u_constant_coupling_uniform_motion():
    system = ConstantCouplingSystem(alpha=0.5, beta0=0.3, gamma=1.0, mgl=0.0, slope_force=1.7)
    g = Gains(1.0, 1.0, QuadraticShaping(0.0))
    qs = [ConfigPoint(0.1 + 0.02 * j, -0.3 + 0.05 * j) for j in range(3)]
    assert control_impulse_u(system, g, *qs, H) == pytest.approx(-H * system.dV2(0.0), rel=1e-13)


def test_w_at_equilibrium(params, gains):
    o = ConfigPoint(0.0, 0.0)
    assert shape_correction_w(params, gains, o, o, o, H) == 0.0


def test_equilibrium_satisfies_both_systems(params, gains):
    o = ConfigPoint(0.0, 0.0)
    u = control_impulse_u(params, gains, o, o, o, H)
    assert np.abs(del_residual(params, o, o, o, H, (0.0, -u))).max() <= 1e-15
    lc = ControlledLagrangian(params, gains)
    w = shape_correction_w(params, gains, o, o, o, H)
    assert np.abs(del_residual(lc, o, o, o, H, (-w, 0.0))).max() <= 1e-15


def test_oracles_on_equilibrium_trajectory(params, gains):
    traj = constant_trajectory((0.0, 0.0))
    assert np.allclose(matching_oracle_u(traj, params, gains), GRAVITY_IMPULSE, rtol=1e-13)
    assert np.all(np.abs(matching_oracle_w(traj, params, gains)) <= 1e-15)


def test_oracle_u_degenerate_gains_without_slope():
    # controlled and original coincide when beta = 0, sigma = rho = 1, no shaping and no slope
    system = ConstantCouplingSystem(alpha=0.6, beta0=0.0, gamma=1.2, mgl=0.3)
    g = Gains(1.0, 1.0, QuadraticShaping(0.0))
    q0, q1 = ConfigPoint(0.2, 0.0), ConfigPoint(0.21, 0.03)
    ctrl = simulate_controlled_side(system, g, q0, q1, H, 200)
    assert np.abs(matching_oracle_u(ctrl, system, g)).max() <= 1e-12


def test_oracle_u_generic_gains_smooth(params, gains):
    ctrl = simulate_controlled_side(params, gains, *rest_pair(params, 0.1), H, 1000)
    oracle = matching_oracle_u(ctrl, params, gains)
    assert np.all(np.isfinite(oracle))
    # no jumps: step-to-step change stays a small fraction of the range
    assert np.abs(np.diff(oracle)).max() < 0.2 * np.abs(oracle).max()


def test_u_formula_matches_oracle(params, gains):
    ctrl = simulate_controlled_side(params, gains, *rest_pair(params, 0.1), H, 1000)
    oracle = matching_oracle_u(ctrl, params, gains)
    u = formula_sequence(control_impulse_u, ctrl, params, gains)
    assert np.all(np.abs(u - oracle) <= 1e-9 * np.maximum(1.0, np.abs(oracle)))


def test_w_formula_matches_oracle(params, gains):
    orig = simulate_closed_loop(params, gains, *rest_pair(params, 0.1), H, 1000)
    oracle = matching_oracle_w(orig, params, gains)
    w = formula_sequence(shape_correction_w, orig, params, gains)
    assert np.abs(w - oracle).max() <= 1e-9


def test_rejected_readings_disagree_with_oracles(params, gains):
    ctrl = simulate_controlled_side(params, gains, *rest_pair(params, 0.1), H, 200)
    oracle = matching_oracle_u(ctrl, params, gains)
    s_reading = formula_sequence(matching_impulse_u, ctrl, params, gains, variant="s_midpoint")
    assert np.abs(s_reading - oracle).max() > 1e-6
    orig = simulate_closed_loop(params, gains, *rest_pair(params, 0.1), H, 200)
    printed = formula_sequence(shape_correction_w, orig, params, gains, form="printed")
    assert np.abs(printed - matching_oracle_w(orig, params, gains)).max() > 1e-6


def test_variant_resolution_matches_generated_defaults(params, gains):
    variant, w_form, gaps = resolve_matching_variant(params, gains, *rest_pair(params, 0.1), H)
    assert (variant, w_form) == (_matching.DEFAULT_VARIANT, _matching.DEFAULT_W_FORM)
    assert gaps[variant] <= 1e-9 and gaps[w_form] <= 1e-9


def test_unknown_variant_rejected(params, gains):
    o = ConfigPoint(0.0, 0.0)
    with pytest.raises(ValueError):
        matching_impulse_u(params, gains, o, o, o, H, variant="x_midpoint")
    with pytest.raises(ValueError):
        shape_correction_w(params, gains, o, o, o, H, form="other")


@pytest.mark.parametrize("beta0", [0.0, 0.2, -0.35])
def test_w_vanishes_for_constant_coupling(beta0):
    system = ConstantCouplingSystem(alpha=0.8, beta0=beta0, gamma=1.1, mgl=0.5, slope_force=0.9)
    # half of the admissible sigma range keeps the trajectories bounded
    bound = beta0 ** 2 / (system.alpha * system.gamma - beta0 ** 2)
    g = Gains(-0.5 * bound if beta0 else -0.3, -0.2, QuadraticShaping(-0.4))
    q0, q1 = ConfigPoint(0.15, 0.0), ConfigPoint(0.16, 0.01)
    ctrl = simulate_controlled_side(system, g, q0, q1, H, 500)
    assert np.abs(formula_sequence(shape_correction_w, ctrl, system, g)).max() <= 1e-10
    orig = simulate_closed_loop(system, g, q0, q1, H, 500)
    assert np.abs(matching_oracle_w(orig, system, g)).max() <= 1e-10


@pytest.mark.parametrize("D", [0.0, 0.005, 0.05])
def test_matching_holds_with_dissipation(params, D):
    g = Gains(-0.1, -0.05, QuadraticShaping(-0.1), D=D)
    q0, q1 = rest_pair(params, 0.1)
    a = simulate_closed_loop(params, g, q0, q1, H, 1000)
    b = simulate_controlled_side(params, g, q0, q1, H, 1000)
    assert np.abs(a.q - b.q).max() <= 1e-8


def test_dissipation_drives_to_target_cart_position(params):
    g = Gains(-0.1, -0.05, QuadraticShaping(-0.1), D=0.005, s_e=0.3)
    tr = simulate_closed_loop(params, g, *rest_pair(params, 0.1), H, 3000)
    assert abs(tr.q[-1, 0]) < 1e-6 and abs(tr.q[-1, 1] - 0.3) < 1e-6


def test_continuous_law_agrees_with_discrete_impulse_on_closed_loop(params, gains):
    # along a closed-loop solution, u_k / h and the continuous matching force agree as h -> 0
    gaps = []
    for h in (0.01, 0.005):
        tr = simulate_closed_loop(params, gains, *rest_pair(params, 0.1, h=h), h, int(0.5 / h))
        k = len(tr.q) // 2
        qa, qb, qc = tr.q[k - 1], tr.q[k], tr.q[k + 1]
        discrete = -control_impulse_u(params, gains, qa, qb, qc, h) / h
        mid = 0.5 * (qa + qc)
        cont = matching_force(params, gains, mid[0], mid[1],
                              (qc[0] - qa[0]) / (2 * h), (qc[1] - qa[1]) / (2 * h), h)
        gaps.append(abs(discrete - cont))
    assert gaps[1] < 0.5 * gaps[0]
    assert gaps[1] < 1e-2
