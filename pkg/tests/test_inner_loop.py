import numpy as np
import pytest

from helpers import modified, random_fixed_state
from frictorq.control_fixed import JointReference, baseline_fixed_control, ef_fixed_control
from frictorq.dynamics import RobotState, compute_dynamics, raw_vector
from frictorq.friction import friction_quantities
from frictorq.inner_loop import (InnerLoopState, baseline_motor_torque, ef_motor_torque, joint_torque,
                                 measure_u)
from frictorq.model import load_fixture
from frictorq.sim import _joint_accel, step_physics, tune_joint_gains


def test_baseline_examples(arm, rng):
    tau = rng.normal(size=4)
    KI = 5.0 * np.eye(4)
    out, _ = baseline_motor_torque(arm, tau, tau, np.zeros(4), InnerLoopState.zero(4), KI, 1e-3)
    assert np.allclose(out, arm.actuation.gamma.T @ tau, rtol=1e-15, atol=0)
    v = rng.normal(size=4)
    out, _ = baseline_motor_torque(arm, tau, tau, v, InnerLoopState.zero(4), KI, 1e-3)
    assert np.allclose(out, np.diag(arm.actuation.kv) * v + arm.actuation.gamma.T @ tau, rtol=1e-14)


def test_baseline_coulomb_uses_regularized_sign(arm):
    m = modified(arm, kc=np.diag([0.1] * 4))
    v = np.array([1e-3, -2.0, 0.0, 5e-5])
    out, _ = baseline_motor_torque(m, np.zeros(4), np.zeros(4), v, InnerLoopState.zero(4), np.eye(4), 1e-3)
    expect = np.diag(m.actuation.kv) * v + 0.1 * v / (np.abs(v) + 1e-4)
    assert np.allclose(out, expect, rtol=1e-14, atol=0)


def test_integral_accumulates(arm):
    delta = np.array([0.1, -0.2, 0.3, 0.0])
    il = InnerLoopState.zero(4)
    for _ in range(7):
        _, il = baseline_motor_torque(arm, np.zeros(4), delta, np.zeros(4), il, np.eye(4), 1e-3)
    assert np.allclose(il.integral, 7e-3 * delta, rtol=1e-12)
    assert il.t == pytest.approx(7e-3)


def test_integral_clamp(arm):
    il = InnerLoopState.zero(4, clamp=0.01)
    for _ in range(100):
        _, il = ef_motor_torque(arm, np.zeros(4), np.array([1.0, -1.0, 0.0, 2.0]), il, np.eye(4), 1e-3)
    assert np.array_equal(il.integral, [0.01, -0.01, 0.0, 0.01])


def test_nonpositive_dt(arm):
    with pytest.raises(ValueError):
        ef_motor_torque(arm, np.zeros(4), np.zeros(4), InnerLoopState.zero(4), np.eye(4), 0.0)


def test_ef_examples(arm, rng):
    u = rng.normal(size=4)
    out, il = ef_motor_torque(arm, u, u, InnerLoopState.zero(4), 5 * np.eye(4), 1e-3)
    assert np.allclose(out, arm.actuation.gamma.T @ u, rtol=1e-15, atol=0)
    assert np.array_equal(il.integral, np.zeros(4))
    m = modified(arm, gamma=np.eye(4))
    w = rng.normal(size=4)
    KI = np.diag([1.0, 2.0, 3.0, 4.0])
    out, _ = ef_motor_torque(m, np.zeros(4), np.zeros(4), InnerLoopState(w.copy()), KI, 1e-3)
    assert np.allclose(out, -KI @ w, rtol=1e-15)


def test_measure_u_examples(pendulum, arm, rng):
    tau_m = rng.normal(size=2)
    assert np.allclose(measure_u(modified(pendulum, gamma=np.eye(2)), tau_m), tau_m, rtol=1e-15)
    assert np.allclose(measure_u(pendulum, tau_m), 100.0 * tau_m, rtol=1e-13)
    u = rng.normal(size=4)
    assert np.allclose(measure_u(arm, arm.actuation.gamma.T @ u), u, rtol=1e-12)


def test_measure_u_singular_gamma(pendulum):
    with pytest.raises(np.linalg.LinAlgError):
        measure_u(modified(pendulum, gamma=np.array([[1.0, 1.0], [1.0, 1.0]])), np.zeros(2))


def test_baseline_closed_loop_residual(rng):
    arm = modified(load_fixture("arm4"), kc=np.diag([0.02, 0.01, 0.03, 0.02]))
    gi = np.linalg.inv(arm.actuation.gamma)
    KI = np.diag([5.0, 4.0, 3.0, 2.0])
    for _ in range(20):
        st_ = random_fixed_state(arm, rng)
        dq = compute_dynamics(arm, st_)
        tau_star = rng.normal(scale=3.0, size=4)
        il = InnerLoopState(rng.normal(scale=0.1, size=4))
        thd = gi @ st_.sdot
        tau_m, _ = baseline_motor_torque(arm, tau_star, tau_star, thd, il, KI, 1e-3)
        sdd = _joint_accel(arm, raw_vector(arm, st_), tau_m, None, 10.0)
        # torque reaching the links from the rigid-body equation
        tau = dq.Ms @ sdd + dq.hs
        expect = tau_star - gi.T @ arm.actuation.im @ (gi @ sdd) - KI @ il.integral
        assert np.abs(tau - expect).max() <= 1e-8 * max(1.0, np.abs(tau).max())
        assert np.allclose(joint_torque(arm, tau_m, thd, gi @ sdd), tau, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("controller", ["baseline", "ef"])
def test_inner_loop_removes_constant_bias(controller):
    # a constant motor torque bias is rejected by the integral at steady state
    model = load_fixture("pendulum2")
    gi = np.linalg.inv(model.actuation.gamma)
    bias = np.array([0.002, -0.001])
    s_d = np.array([0.3, -0.2])
    ref = JointReference.hold(s_d)
    state = RobotState.home(model)
    gains = tune_joint_gains(compute_dynamics(model, state).Ms_bar, 1e-2)
    KI = 5.0 * np.eye(2)
    il = InnerLoopState.zero(2)
    tau_m = np.zeros(2)
    err = []
    for k in range(500):
        dq = compute_dynamics(model, state)
        fq = friction_quantities(model, dq.Ms, state.sdot)
        if controller == "ef":
            cmd = ef_fixed_control(dq, fq, ref, state, gains)
        else:
            cmd = baseline_fixed_control(dq, ref, state, gains)
        for j in range(10):
            applied = tau_m + bias
            if controller == "ef":
                meas = measure_u(model, applied)
                tau_m, il = ef_motor_torque(model, cmd, meas, il, KI, 1e-3)
            else:
                y = raw_vector(model, state)
                sdd = _joint_accel(model, y, applied, None, 10.0)
                meas = joint_torque(model, applied, gi @ state.sdot, gi @ sdd)
                tau_m, il = baseline_motor_torque(model, cmd, meas, gi @ state.sdot, il, KI, 1e-3)
            state = step_physics(model, state, tau_m + bias, 1e-4, nsteps=10)
        err.append(np.abs(meas - cmd).max())
    assert err[0] > 1e-2
    assert err[-1] <= 1e-4
    assert np.abs(state.s - s_d).max() < 1e-3
