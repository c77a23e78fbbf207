import math
import warnings

import numpy as np
import pytest

from dclag import CartPendulumParams, ConfigPoint, Gains, NewtonSettings, QuadraticShaping, free_particle
from dclag.mechanics import NonConvergence, step
from dclag.mpc import (BudgetExceeded, MpcConfig, PlantState, control_force_from_prediction,
                       plant_advance, predict_two_steps, run_digital_controller)

from conftest import H

GRAVITY_FORCE = 0.58 * 9.81 * math.sin(math.pi / 9)
DAMPED = Gains(-0.1, -0.05, QuadraticShaping(-0.1), D=0.005)


@pytest.mark.parametrize("kwargs", [dict(h=0.0), dict(h=0.05, T_f=0.07), dict(plant_substeps=0),
                                    dict(h=0.05, T_f=0.1), dict(realization="other")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        MpcConfig(**kwargs)


def test_config_periods():
    assert MpcConfig().periods == 600
    assert MpcConfig(h=0.1, T_f=1.0).periods == 10


def test_prediction_free_particle_uniform_motion():
    fp = free_particle()
    qb, qb1, f, _ = predict_two_steps(fp, H, ConfigPoint(0.0, 0.0), ConfigPoint(0.01, 0.1), (0.0, 0.0))
    assert qb == pytest.approx((0.02, 0.2), abs=1e-15)
    assert qb1 == pytest.approx((0.03, 0.3), abs=1e-15)
    assert f == 0.0


def test_first_prediction_is_unforced_step(params):
    q0, q1 = ConfigPoint(0.1, 0.0), ConfigPoint(0.095, 0.004)
    qb, _, _, _ = predict_two_steps(params, H, q0, q1, (0.0, 0.0))
    assert qb == step(params, q0, q1, H).q


def test_prediction_gap_is_second_order(params):
    gaps = []
    for h in (0.05, 0.025, 0.0125):
        s0 = PlantState(0.1, 0.0, 0.2, 0.1)
        forces = (-1.0, -2.0, -1.5)
        s1 = plant_advance(params, s0, forces[0], h, 200)
        s2 = plant_advance(params, s1, forces[1], h, 200)
        s3 = plant_advance(params, s2, forces[2], h, 200)
        qb, qb1, _, _ = predict_two_steps(params, h, s0.q, s1.q, forces[:2],
                                          lambda a, b, c: forces[2])
        gaps.append(max(np.linalg.norm(np.subtract(qb, s2.q)), np.linalg.norm(np.subtract(qb1, s3.q))))
    assert gaps[0] < 1e-3
    assert gaps[0] / gaps[1] >= 3.5 and gaps[1] / gaps[2] >= 3.5


@pytest.mark.parametrize("realization", ["continuous", "impulse"])
def test_force_at_equilibrium_compensates_gravity(params, realization):
    o = ConfigPoint(0.0, 0.0)
    f = control_force_from_prediction(params, DAMPED, o, o, o, H, realization)
    # positive s points downhill, so holding the cart needs a negative force
    assert f == pytest.approx(params.dV2(0.0), rel=1e-12)
    assert abs(f) == pytest.approx(1.946198, rel=1e-4)
    assert params.continuous_accelerations(0.0, 0.0, 0.0, 0.0, f) == pytest.approx((0.0, 0.0), abs=1e-12)


@pytest.mark.parametrize("realization", ["continuous", "impulse"])
def test_force_without_shaping_at_rest_is_slope_only(params, realization):
    g = Gains(-0.1, -0.05, QuadraticShaping(0.0))
    q = ConfigPoint(0.0, 0.7)
    assert control_force_from_prediction(params, g, q, q, q, H, realization) == pytest.approx(
        params.dV2(0.7), rel=1e-12)


@pytest.mark.parametrize("realization", ["continuous", "impulse"])
def test_force_converges_as_step_shrinks(params, realization):
    g = Gains(-0.1, -0.05, QuadraticShaping(-0.1))

    def path(t):
        return ConfigPoint(0.1 * math.cos(2 * t) + 0.05 * t, 0.2 * math.sin(t))
    t0 = 0.3
    values = [control_force_from_prediction(params, g, path(t0 - h), path(t0), path(t0 + h), h, realization)
              for h in (0.04, 0.02, 0.01)]
    d = np.abs(np.diff(values))
    assert d[1] <= 0.5 * d[0]


def test_equilibrium_is_invariant_on_level_track():
    params = CartPendulumParams(psi=0.0)
    res = run_digital_controller(params, DAMPED, MpcConfig(T_f=5.0), PlantState(0.0, 0.0, 0.0, 0.0))
    assert np.abs(res.q).max() <= 1e-6
    assert np.abs(res.schedule.forces).max() <= 1e-12


def test_schedule_integrity_and_causality(params):
    cfg = MpcConfig(T_f=3.0)
    res = run_digital_controller(params, DAMPED, cfg, PlantState(0.1, 0.0, 0.0, 0.0))
    sched = res.schedule
    assert len(sched.forces) == cfg.periods
    assert sched.forces[0] == 0.0 and sched.forces[1] == 0.0
    iv = sched.intervals()
    assert iv[0][0] == 0.0 and iv[-1][1] == pytest.approx(cfg.T_f)
    for (a0, a1, _), (b0, _, _) in zip(iv, iv[1:]):
        assert a1 == b0 and a1 - a0 == pytest.approx(cfg.h)
    t = res.t
    assert np.all(np.diff(t) > 0) and t[-1] == pytest.approx(cfg.T_f)
    # the force on [kh, (k+1)h] is reproduced from the samples at (k-2)h and (k-1)h
    for k in (2, 3, 10, 40):
        _, _, f, _ = predict_two_steps(
            params, cfg.h, res.states[k - 2].q, res.states[k - 1].q,
            (sched.forces[k - 2], sched.forces[k - 1]),
            lambda a, b, c: control_force_from_prediction(params, DAMPED, a, b, c, cfg.h))
        assert f == sched.forces[k]


def test_stabilizes_larger_offset(params):
    res = run_digital_controller(params, DAMPED, MpcConfig(), PlantState(0.15, 0.0, 0.0, 0.0))
    x = np.array([[s.phi, s.s, s.phidot, s.sdot] for s in res.states])
    norms = np.linalg.norm(x, axis=1)
    outside = np.nonzero(norms >= 1e-2)[0]
    assert outside[-1] < len(norms) - 1


def test_no_dissipation_sustains_oscillation(params):
    g = Gains(-0.1, -0.05, QuadraticShaping(-0.1))
    res = run_digital_controller(params, g, MpcConfig(), PlantState(0.1, 0.0, 0.0, 0.0))
    q = np.abs(res.q)
    first, last = q[res.t <= 10.0].max(), q[res.t >= 20.0].max()
    assert last > 1e-2
    assert 1 / 3 <= last / first <= 3


def test_impulse_realization_does_not_stabilize(params):
    cfg = MpcConfig(T_f=5.0, realization="impulse")
    try:
        res = run_digital_controller(params, DAMPED, cfg, PlantState(0.1, 0.0, 0.0, 0.0))
    except NonConvergence as exc:
        assert exc.step_index is not None
    else:
        assert np.abs(res.q[-1]).max() > 1e-2


def test_nonconvergence_reports_period(params):
    settings = NewtonSettings(residual_tolerance=1e-300, max_iterations=1)
    with pytest.raises(NonConvergence) as info:
        run_digital_controller(params, DAMPED, MpcConfig(T_f=1.0), PlantState(0.1, 0, 0, 0), settings)
    assert info.value.step_index == 2


def test_realtime_mode_warns_and_keeps_updating(params):
    cfg = MpcConfig(h=1e-6, T_f=1e-5, plant_substeps=1, realtime_mode=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = run_digital_controller(params, DAMPED, cfg, PlantState(0.1, 0.0, 0.0, 0.0))
    assert any(issubclass(w.category, BudgetExceeded) for w in caught)
    assert len(res.schedule.forces) == cfg.periods
    assert len(res.compute_time) == cfg.periods - 2
