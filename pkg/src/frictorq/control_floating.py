"""Momentum-based balancing controllers for floating-base robots in rigid
contact.

Both controllers pick contact wrenches that realize a desired rate of change
of the centroidal momentum, resolve the remaining wrench redundancy with a
QP over the friction/CoP constraints, and compute joint torques realizing
those wrenches with a postural task in the null space.

The friction-exploiting (EF) variant splits the contact wrench as
f = f_m(u) + D Kf_bar sdot, where D maps joint-side forces into contact
wrenches, and adds the friction-induced momentum damping T into the
momentum reference so that the closed loop becomes

    d/dt H~ + (Kp + T) H~ + Ki I_H~ = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .control_fixed import JointGains, JointReference
from .dynamics import DynamicsQuantities, RankError, pinv
from .friction import FrictionQuantities
from .qp import (QuadraticCost, constraint_names, friction_cone_constraints,
                 nullspace_basis, solve_redundancy_qp)

DEFAULT_CLAMP = 50.0


@dataclass
class MomentumGains:
    Kp: np.ndarray
    Ki: np.ndarray
    KI_inner: np.ndarray
    joint: JointGains

    def __post_init__(self):
        for name in ("Kp", "Ki", "KI_inner"):
            K = np.asarray(getattr(self, name), dtype=float)
            if np.abs(K - K.T).max() > 1e-12 or np.linalg.eigvalsh(K)[0] <= 0:
                raise ValueError(f"{name} must be symmetric positive definite")
            setattr(self, name, K)


@dataclass
class MomentumReference:
    H_d: np.ndarray
    Hdot_d: np.ndarray


@dataclass
class ControllerState:
    I_Htilde: np.ndarray = field(default_factory=lambda: np.zeros(6))
    clamp: Optional[float] = DEFAULT_CLAMP

    @classmethod
    def zero(cls, clamp: Optional[float] = DEFAULT_CLAMP) -> "ControllerState":
        return cls(np.zeros(6), clamp)


@dataclass
class ControlOutput:
    command: np.ndarray  # u* (EF) or tau* (baseline), joint side
    f_star: np.ndarray  # contact wrench the plant is expected to produce
    f_m_star: np.ndarray
    f_m1: np.ndarray
    Hdot_star: np.ndarray
    N_b: np.ndarray
    Lambda_bar: np.ndarray
    N_Lambda: np.ndarray
    u_null: np.ndarray
    u_0: np.ndarray
    D: Optional[np.ndarray] = None
    T: Optional[np.ndarray] = None
    cone_margin: float = np.inf
    T_min_eig: float = np.nan

    @property
    def u_star(self) -> np.ndarray:
        return self.command

    @property
    def tau_star(self) -> np.ndarray:
        return self.command


def nullspace_projector(A: np.ndarray) -> np.ndarray:
    """I - A^+ A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    N = np.eye(A.shape[1]) - pinv(A) @ A
    return 0.5 * (N + N.T)


def _mbar_solve(dq: DynamicsQuantities, Ms_bar: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Mbar^-1 rhs for the block-diagonal centroidal mass matrix."""
    rhs = np.asarray(rhs, dtype=float)
    out = np.empty_like(rhs)
    out[:3] = rhs[:3] / dq.mass
    out[3:6] = np.linalg.solve(dq.Mb[3:, 3:], rhs[3:6])
    out[6:] = cho_solve(cho_factor(Ms_bar), rhs[6:])
    return out


def _JMinv(dq: DynamicsQuantities, Ms_bar: np.ndarray) -> np.ndarray:
    """J Mbar^-1 (symmetric Mbar)."""
    return _mbar_solve(dq, Ms_bar, dq.J.T).T


def wrench_map_D(dq: DynamicsQuantities, fq: FrictionQuantities):
    """Return (D, f_m) with D = G^-1 J Mbar^-1 B, G = J Mbar^-1 J^T and
    f_m(u) = G^-1 (J Mbar^-1 (h - B u) - Jdot nu)."""
    JMi = _JMinv(dq, fq.Ms_bar)
    G = JMi @ dq.J.T
    try:
        Gc = cho_factor(0.5 * (G + G.T))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular contact Gram matrix J Mbar^-1 J^T") from exc
    nb = dq.nb
    D = cho_solve(Gc, JMi[:, nb:])
    base = cho_solve(Gc, JMi @ dq.h - dq.Jdotnu)

    def f_m(u):
        return base - D @ np.asarray(u, dtype=float)

    return D, f_m


def momentum_rate(dq: DynamicsQuantities, f: np.ndarray, m: Optional[float] = None,
                  g: Optional[float] = None) -> np.ndarray:
    """Hdot = J_b^T f - m g e3 (linear part first)."""
    m = dq.mass if m is None else m
    g = dq.gravity if g is None else g
    out = dq.Jb.T @ np.asarray(f, dtype=float)
    out[2] -= m * g
    return out


def momentum_integral_update(istate: ControllerState, dq: DynamicsQuantities, Jg_d: np.ndarray,
                             sdot, sdot_d, dt: float) -> ControllerState:
    """Euler step of the momentum error integral: linear rows of Jbar_G at
    the current posture, angular rows at the desired posture ``Jg_d``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    Jmix = np.vstack([dq.Jg[:3], np.asarray(Jg_d)[3:]])
    I = istate.I_Htilde + dt * (Jmix @ (np.asarray(sdot, dtype=float) - np.asarray(sdot_d, dtype=float)))
    if istate.clamp is not None:
        I = np.clip(I, -istate.clamp, istate.clamp)
    return replace(istate, I_Htilde=I)


def _jb_pinv_T(dq: DynamicsQuantities) -> np.ndarray:
    """Right pseudoinverse of J_b^T."""
    JbT = dq.Jb.T
    sv = np.linalg.svd(JbT, compute_uv=False)
    if sv[-1] <= sv[0] * 1e-8:
        raise RankError("J_b^T is not full row rank")
    return pinv(JbT)


def _cones(dq: DynamicsQuantities, cones, shrink=0.0):
    A, b = friction_cone_constraints(list(cones), dq.contact_R, shrink)
    return A, b, constraint_names(list(cones))


def _hdot_feedback(dq, ref: MomentumReference, istate: ControllerState, gains: MomentumGains):
    Htil = dq.H - ref.H_d
    return ref.Hdot_d - gains.Kp @ Htil - gains.Ki @ istate.I_Htilde


def _solve(cost, A, b, names, f_base, shift, Z):
    """QP over f = f_base + Z y with constraints applied to f + shift."""
    N_b = Z @ Z.T
    f0 = solve_redundancy_qp(cost, A, b - A @ shift, N_b, f_base, names, basis=Z)
    return f_base + f0


def baseline_momentum_controller(dq: DynamicsQuantities, fq: FrictionQuantities,
                                 ref: MomentumReference, istate: ControllerState,
                                 gains: MomentumGains, cones, jref: JointReference,
                                 reflected: bool = False, cone_shrink: float = 0.0) -> ControlOutput:
    """Classical momentum controller with friction compensation delegated to
    the inner loop.  With ``reflected`` the reflected motor inertia is
    included in the inertia used by the torque map and postural task.
    ``cone_shrink`` tightens the planning cones (see friction_cone_constraints)."""
    if not dq.floating or dq.nc == 0:
        raise ValueError("momentum controllers need a floating base in contact")
    Ms = fq.Ms_bar if reflected else dq.Ms
    n = dq.n
    Hdot_star = _hdot_feedback(dq, ref, istate, gains)
    JbTp = _jb_pinv_T(dq)
    f1 = JbTp @ (Hdot_star + dq.gravity_wrench)
    Z = nullspace_basis(dq.Jb.T)
    N_b = nullspace_projector(dq.Jb.T)

    JMi = _JMinv(dq, Ms)
    Lam = dq.Js @ cho_solve(cho_factor(Ms), np.eye(n))
    Lam_p = pinv(Lam)
    N_L = nullspace_projector(Lam)
    s_err = dq.s - jref.s_d
    sd_err = dq.sdot - jref.sdot_d
    u0 = -gains.joint.Kp_s @ N_L @ Ms @ s_err - gains.joint.Kd_s @ N_L @ Ms @ sd_err
    # tau*(f) = L f + c
    L = -Lam_p @ JMi @ dq.J.T - N_L @ dq.Js.T
    c = Lam_p @ (JMi @ dq.h - dq.Jdotnu) + N_L @ (dq.hs + u0)
    A, b, names = _cones(dq, cones, cone_shrink)
    f = _solve(QuadraticCost(L, c), A, b, names, f1, np.zeros_like(f1), Z)
    tau0 = dq.hs - dq.Js.T @ f + u0
    tau = Lam_p @ (JMi @ (dq.h - dq.J.T @ f) - dq.Jdotnu) + N_L @ tau0
    margin = float(np.min(b - A @ f)) if A.size else np.inf
    return ControlOutput(command=tau, f_star=f, f_m_star=f, f_m1=f1, Hdot_star=Hdot_star,
                         N_b=N_b, Lambda_bar=Lam, N_Lambda=N_L, u_null=tau0, u_0=u0,
                         cone_margin=margin)


def ef_momentum_controller(dq: DynamicsQuantities, fq: FrictionQuantities,
                           ref: MomentumReference, istate: ControllerState,
                           gains: MomentumGains, cones, jref: JointReference,
                           cone_shrink: float = 0.0) -> ControlOutput:
    """Friction-exploiting momentum controller; returns u* (joint side)."""
    if not dq.floating or dq.nc == 0:
        raise ValueError("momentum controllers need a floating base in contact")
    n = dq.n
    Ms = fq.Ms_bar
    Kf = fq.Kf_bar
    D, _ = wrench_map_D(dq, fq)
    JbT = dq.Jb.T
    T = JbT @ D @ Kf @ D.T @ dq.Jb
    T = 0.5 * (T + T.T)
    Hdot_star = _hdot_feedback(dq, ref, istate, gains) + T @ ref.H_d
    JbTp = _jb_pinv_T(dq)
    sd = dq.sdot
    split = sd + D.T @ (dq.Jb @ (dq.Jg @ sd))  # (I + D^T J_b Jbar_G) sdot
    f_m1 = JbTp @ (Hdot_star - JbT @ (D @ (Kf @ split)) + dq.gravity_wrench)
    Z = nullspace_basis(JbT)
    N_b = nullspace_projector(JbT)

    JMi = _JMinv(dq, Ms)
    Lam = dq.Js @ cho_solve(cho_factor(Ms), np.eye(n))
    Lam_p = pinv(Lam)
    N_L = nullspace_projector(Lam)
    s_err = dq.s - jref.s_d
    sd_err = sd - jref.sdot_d
    u0 = -gains.joint.Kp_s @ N_L @ Ms @ s_err - gains.joint.Kd_s @ N_L @ Ms @ sd_err
    L = -Lam_p @ JMi @ dq.J.T - N_L @ dq.Js.T
    c = Lam_p @ (JMi @ dq.h - dq.Jdotnu) + N_L @ (dq.hs + Kf @ jref.sdot_d + u0)
    A, b, names = _cones(dq, cones, cone_shrink)
    f_fric = D @ (Kf @ sd)
    f_m = _solve(QuadraticCost(L, c), A, b, names, f_m1, f_fric, Z)
    u_null = dq.hs - dq.Js.T @ f_m + Kf @ jref.sdot_d + u0
    u = Lam_p @ (JMi @ (dq.h - dq.J.T @ f_m) - dq.Jdotnu) + N_L @ u_null
    f = f_m + f_fric
    margin = float(np.min(b - A @ f)) if A.size else np.inf
    return ControlOutput(command=u, f_star=f, f_m_star=f_m, f_m1=f_m1, Hdot_star=Hdot_star,
                         N_b=N_b, Lambda_bar=Lam, N_Lambda=N_L, u_null=u_null, u_0=u0, D=D, T=T,
                         cone_margin=margin, T_min_eig=float(np.linalg.eigvalsh(T)[0]))
