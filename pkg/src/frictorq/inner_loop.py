"""Motor torque inner loops.

The baseline loop cancels friction with a model-based feedforward and
integrates the joint torque error.  The EF loop has no friction term: it
only drives the joint-side input u = Gamma^-T tau_m toward u*, leaving the
physical friction in place.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .friction import _actuation_cache
from .model import RobotModel

DEFAULT_CLAMP = 50.0


@dataclass
class InnerLoopState:
    integral: np.ndarray
    t: float = 0.0
    clamp: Optional[float] = DEFAULT_CLAMP

    @classmethod
    def zero(cls, n: int, clamp: Optional[float] = DEFAULT_CLAMP) -> "InnerLoopState":
        return cls(np.zeros(n), 0.0, clamp)


def _advance(ilstate: InnerLoopState, err: np.ndarray, dt: float) -> InnerLoopState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    integral = ilstate.integral + dt * err
    if ilstate.clamp is not None:
        integral = np.clip(integral, -ilstate.clamp, ilstate.clamp)
    return replace(ilstate, integral=integral, t=ilstate.t + dt)


def baseline_motor_torque(model: RobotModel, tau_star, tau_measured, thetadot,
                          ilstate: InnerLoopState, KI, dt: float):
    """tau_m* = Kv thetadot + Kc sat(thetadot) + Gamma^T (tau* - KI int(tau - tau*)).

    The integral used in the command is the one accumulated up to now; the
    state returned has been advanced by dt (tau - tau*)."""
    act = model.actuation
    _, kv, kc, _ = _actuation_cache(model)
    thetadot = np.asarray(thetadot, dtype=float)
    tau_star = np.asarray(tau_star, dtype=float)
    coulomb = kc * thetadot / (np.abs(thetadot) + act.epsilon)
    tau_m = kv * thetadot + coulomb + act.gamma.T @ (tau_star - np.asarray(KI) @ ilstate.integral)
    return tau_m, _advance(ilstate, np.asarray(tau_measured, dtype=float) - tau_star, dt)


def ef_motor_torque(model: RobotModel, u_star, u_measured, ilstate: InnerLoopState, KI, dt: float):
    """tau_m* = Gamma^T (u* - KI int(u - u*))."""
    u_star = np.asarray(u_star, dtype=float)
    tau_m = model.actuation.gamma.T @ (u_star - np.asarray(KI) @ ilstate.integral)
    return tau_m, _advance(ilstate, np.asarray(u_measured, dtype=float) - u_star, dt)


def measure_u(model: RobotModel, tau_m_applied) -> np.ndarray:
    """Joint-side input u = Gamma^-T tau_m."""
    gi = _actuation_cache(model)[0]
    return gi.T @ np.asarray(tau_m_applied, dtype=float)


def joint_torque(model: RobotModel, tau_m, thetadot, thetaddot) -> np.ndarray:
    """Torque delivered to the joints by the motors,
    tau = Gamma^-T (tau_m - I_m thetadd - K_f thetadot)."""
    act = model.actuation
    gi, kv, kc, _ = _actuation_cache(model)
    thetadot = np.asarray(thetadot, dtype=float)
    kf = kv + kc / (np.abs(thetadot) + act.epsilon)
    motor = np.asarray(tau_m, dtype=float) - np.diag(act.im) * thetaddot - kf * thetadot
    return gi.T @ motor
