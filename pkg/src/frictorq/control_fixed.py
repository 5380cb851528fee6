"""Joint-space controllers for fixed-base robots.

The friction-exploiting (EF) law feeds the joint-side friction matrix forward
with the *reference* velocity, so the physical friction acting on the
velocity error adds damping instead of being cancelled:

    u* = h_s + Mbar_s sdd_d - Kp (s - s_d) - Kd (sd - sd_d) + Kf_bar sd_d

The baseline law is the same computed-torque expression without the
friction term; friction is then cancelled by the inner loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicsQuantities, RobotState
from .friction import FrictionQuantities


@dataclass
class JointGains:
    Kp_s: np.ndarray
    Kd_s: np.ndarray

    @classmethod
    def diagonal(cls, kp, kd, n: int | None = None) -> "JointGains":
        kp = np.atleast_1d(np.asarray(kp, dtype=float))
        kd = np.atleast_1d(np.asarray(kd, dtype=float))
        if n is not None:
            kp = np.broadcast_to(kp, (n,))
            kd = np.broadcast_to(kd, (n,))
        return cls(np.diag(kp), np.diag(kd))


@dataclass
class JointReference:
    s_d: np.ndarray
    sdot_d: np.ndarray
    sddot_d: np.ndarray

    def __post_init__(self):
        for name in ("s_d", "sdot_d", "sddot_d"):
            val = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(val)):
                raise ValueError(f"joint reference {name} is not finite")
            setattr(self, name, val)

    @classmethod
    def hold(cls, s_d) -> "JointReference":
        s_d = np.asarray(s_d, dtype=float)
        return cls(s_d, np.zeros_like(s_d), np.zeros_like(s_d))


def _check_dims(n: int, **arrays):
    for name, a in arrays.items():
        a = np.asarray(a)
        if a.ndim == 1 and a.shape != (n,) or a.ndim == 2 and a.shape != (n, n) or a.ndim > 2:
            raise ValueError(f"{name} has shape {a.shape}, expected n = {n}")


def _tracking_terms(dq: DynamicsQuantities, Ms_bar, ref: JointReference, state: RobotState,
                    gains: JointGains):
    n = dq.n
    _check_dims(n, s=state.s, sdot=state.sdot, s_d=ref.s_d, sdot_d=ref.sdot_d, sddot_d=ref.sddot_d,
                Kp_s=gains.Kp_s, Kd_s=gains.Kd_s, Ms_bar=Ms_bar)
    s_err = np.asarray(state.s, dtype=float) - ref.s_d
    sd_err = np.asarray(state.sdot, dtype=float) - ref.sdot_d
    return dq.hs + Ms_bar @ ref.sddot_d - gains.Kp_s @ s_err, sd_err


def ef_fixed_control(dq: DynamicsQuantities, fq: FrictionQuantities, ref: JointReference,
                     state: RobotState, gains: JointGains) -> np.ndarray:
    """Friction-exploiting joint torque u*.  ``state`` holds the measured
    velocity; Kf_bar in ``fq`` is whatever the caller evaluated it at."""
    base, sd_err = _tracking_terms(dq, fq.Ms_bar, ref, state, gains)
    return base - gains.Kd_s @ sd_err + fq.Kf_bar @ ref.sdot_d


def baseline_fixed_control(dq: DynamicsQuantities, ref: JointReference, state: RobotState,
                           gains: JointGains, Ms_bar: np.ndarray | None = None) -> np.ndarray:
    """Computed-torque law tau*.  Friction is left to the inner loop, which
    does not cancel the rotor inertia, hence Mbar_s (taken from ``dq`` unless
    given)."""
    Ms = dq.Ms_bar if Ms_bar is None else Ms_bar
    base, sd_err = _tracking_terms(dq, Ms, ref, state, gains)
    return base - gains.Kd_s @ sd_err


def _require_spd(K: np.ndarray, name: str = "K"):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(K, K.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(K).max())):
        raise ValueError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(0.5 * (K + K.T))[0] <= 0.0:
        raise ValueError(f"{name} is not positive definite")
    return K


def family_control(K: np.ndarray, dq: DynamicsQuantities, fq: FrictionQuantities,
                   ref: JointReference, state: RobotState, Kp_s: np.ndarray) -> np.ndarray:
    """Member of the controller family parametrized by the damping K:
    u_f = h_s + Mbar_s sdd_d - Kp s~ - K sd~ + Kf_bar sd."""
    K = _require_spd(K)
    n = dq.n
    base, sd_err = _tracking_terms(dq, fq.Ms_bar, ref, state, JointGains(Kp_s, np.zeros((n, n))))
    _check_dims(n, K=K)
    return base - K @ sd_err + fq.Kf_bar @ np.asarray(state.sdot, dtype=float)


def sensitivity_norm(K: np.ndarray, Kf_bar_const: np.ndarray) -> float:
    """Squared Frobenius norm of d(ubar)/d(sdot) = Kf_bar - K for the
    family's velocity-dependent part ubar = -K (sd - sd_d) + Kf_bar sd."""
    K = _require_spd(K)
    D = np.asarray(Kf_bar_const, dtype=float) - K
    return float(np.sum(D * D))


def closed_loop_accel(Ms_bar: np.ndarray, Kf_bar: np.ndarray, gains: JointGains,
                      s_err: np.ndarray, sd_err: np.ndarray) -> np.ndarray:
    """Error acceleration of the ideal EF closed loop,
    -Mbar_s^-1 ((Kd + Kf_bar) sd~ + Kp s~)."""
    return -np.linalg.solve(Ms_bar, (gains.Kd_s + Kf_bar) @ sd_err + gains.Kp_s @ s_err)
