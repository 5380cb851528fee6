"""Multi-body dynamics in centroidal coordinates.

The generalized velocity is nu = (v_B, sdot) with v_B = (CoM velocity,
locked angular velocity).  In these coordinates the mass matrix is block
diagonal, M = blockdiag(M_b, M_s), with M_b = blockdiag(m I_3, I_G) and the
centroidal momentum is H = M_b v_B.

Internally the recursions run on the "raw" floating-base coordinates
nu' = (x, sdot), where x is the spatial velocity of the root link.  With
M' = [[A, F], [F^T, M'_s]] the transform is

    v_B = P (x + A^{-1} F sdot),    P: (omega, v_O) -> (pdot_c, omega_o)

which yields M_s = M'_s - F^T A^{-1} F,  h_b = (m g e3, dI_G/dt omega_o)
and h_s = r_s - F^T A^{-1} r_b, where r is the bias of the raw equations.

Contact frames: each contact contributes a 6-row block (linear velocity of
the contact point, angular velocity of the contact frame), both in world
coordinates; the corresponding wrench is (force, moment about the contact
point).  Jdotnu uses the same frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

from . import _kernels as K
from .friction import friction_quantities, reflected_inertia
from .model import RobotModel, rpy_to_matrix

PINV_RCOND = 1e-8
E3 = np.array([0.0, 0.0, 1.0])


class RankError(np.linalg.LinAlgError):
    pass


class ConstraintSingularError(np.linalg.LinAlgError):
    pass


def pinv(a: np.ndarray, rcond: float = PINV_RCOND) -> np.ndarray:
    """SVD pseudoinverse with cutoff sigma_max * rcond."""
    return np.linalg.pinv(a, rcond=rcond)


def skew(v) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R) -> np.ndarray:
    tr = np.trace(R)
    if tr > 0:
        S = np.sqrt(tr + 1.0) * 2
        q = [0.25 * S, (R[2, 1] - R[1, 2]) / S, (R[0, 2] - R[2, 0]) / S, (R[1, 0] - R[0, 1]) / S]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        S = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        q = [(R[2, 1] - R[1, 2]) / S, 0.25 * S, (R[0, 1] + R[1, 0]) / S, (R[0, 2] + R[2, 0]) / S]
    elif R[1, 1] > R[2, 2]:
        S = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        q = [(R[0, 2] - R[2, 0]) / S, (R[0, 1] + R[1, 0]) / S, 0.25 * S, (R[1, 2] + R[2, 1]) / S]
    else:
        S = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        q = [(R[1, 0] - R[0, 1]) / S, (R[0, 2] + R[2, 0]) / S, (R[1, 2] + R[2, 1]) / S, 0.25 * S]
    q = np.array(q)
    return q / np.linalg.norm(q)


def quat_derivative(q, omega) -> np.ndarray:
    """dq/dt for a world-frame angular velocity (q = w, x, y, z)."""
    w, x, y, z = q
    ox, oy, oz = omega
    return 0.5 * np.array([
        -ox * x - oy * y - oz * z,
        ox * w + oy * z - oz * y,
        -ox * z + oy * w + oz * x,
        ox * y - oy * x + oz * w,
    ])


# ---------------------------------------------------------------------------
# compiled model


class CompiledModel:
    """Flat arrays consumed by the compiled kernels."""

    def __init__(self, model: RobotModel):
        n = model.n
        root = model.root_link()
        link_of_joint = {j.child: i for i, j in enumerate(model.joints)}
        self.parent = np.array([link_of_joint.get(j.parent, -1) for j in model.joints], dtype=np.int64)
        order: list[int] = []
        placed = set()
        while len(order) < n:
            for i in range(n):
                if i not in placed and (self.parent[i] < 0 or self.parent[i] in placed):
                    order.append(i)
                    placed.add(i)
        self.order = np.array(order, dtype=np.int64)
        self.Xrot = np.array([rpy_to_matrix(j.origin_rpy) for j in model.joints]).reshape(n, 3, 3)
        self.Xpos = np.array([j.origin_xyz for j in model.joints], dtype=float).reshape(n, 3)
        self.axis = np.array([j.axis for j in model.joints], dtype=float).reshape(n, 3)
        body_links = [model.links[model.link_index(root)]] + [
            model.links[model.link_index(j.child)] for j in model.joints]
        self.mass = np.array([lk.mass for lk in body_links], dtype=float)
        self.com = np.array([lk.com for lk in body_links], dtype=float)
        self.inertia = np.array([lk.inertia for lk in body_links], dtype=float)
        body_of_link = {root: 0}
        body_of_link.update({j.child: i + 1 for i, j in enumerate(model.joints)})
        self.support = np.zeros((n + 1, n), dtype=np.bool_)
        for i in range(n):
            b = i
            while b >= 0:
                self.support[i + 1, b] = True
                b = self.parent[b]
        self.contact_body = np.array([body_of_link[c.link] for c in model.contacts], dtype=np.int64)
        self.contact_R = np.array([c.rotation for c in model.contacts]).reshape(-1, 3, 3)
        self.contact_p = np.array([c.origin_xyz for c in model.contacts], dtype=float).reshape(-1, 3)
        act = model.actuation
        self.gamma_inv = np.linalg.inv(act.gamma)
        self.im = np.diag(act.im).copy()
        self.kv = np.diag(act.kv).copy()
        self.kc = np.diag(act.kc).copy()
        self.eps = float(act.epsilon)
        self.g = float(model.gravity_norm)
        self.g_off = np.array([0.0, 0, 0, 0, 0, self.g])

    def kin_args(self):
        return (self.parent, self.order, self.Xrot, self.Xpos, self.axis, self.mass, self.com,
                self.inertia)

    def plant_args(self):
        return self.kin_args() + (self.gamma_inv, self.im, self.kv, self.kc, self.eps, self.g)

    def floating_args(self):
        return self.plant_args() + (self.support, self.contact_body, self.contact_R, self.contact_p)


_COMPILED: dict[int, tuple[RobotModel, CompiledModel]] = {}


def compiled(model: RobotModel) -> CompiledModel:
    entry = _COMPILED.get(id(model))
    if entry is None or entry[0] is not model:
        entry = (model, CompiledModel(model))
        _COMPILED[id(model)] = entry
    return entry[1]


@njit(cache=True)
def _composite_rate(V, I6):
    out = np.zeros((6, 6))
    for b in range(V.shape[0]):
        v = V[b]
        X = np.zeros((6, 6))
        w = v[:3]
        u = v[3:]
        Sw = K._skew(w)
        Su = K._skew(u)
        X[:3, :3] = Sw
        X[3:, 3:] = Sw
        X[3:, :3] = Su
        # d/dt I = crf(v) I - I crm(v), crf(v) = -crm(v)^T
        out += -X.T @ I6[b] - I6[b] @ X
    return out


# ---------------------------------------------------------------------------
# state and quantities


@dataclass
class RobotState:
    base_pos: np.ndarray
    base_quat: np.ndarray  # (w, x, y, z)
    s: np.ndarray
    vB: np.ndarray  # (CoM velocity, locked angular velocity)
    sdot: np.ndarray

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def nu(self) -> np.ndarray:
        return np.concatenate([self.vB, self.sdot])

    def copy(self) -> "RobotState":
        return RobotState(self.base_pos.copy(), self.base_quat.copy(), self.s.copy(),
                          self.vB.copy(), self.sdot.copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.base_pos, self.base_quat, self.s, self.vB, self.sdot])

    @classmethod
    def from_vector(cls, x: np.ndarray, n: int) -> "RobotState":
        return cls(x[0:3].copy(), x[3:7].copy(), x[7:7 + n].copy(), x[7 + n:13 + n].copy(),
                   x[13 + n:13 + 2 * n].copy())

    @classmethod
    def home(cls, model: RobotModel, s=None) -> "RobotState":
        n = model.n
        return cls(np.array(model.home_base_xyz, dtype=float),
                   matrix_to_quat(rpy_to_matrix(model.home_base_rpy)),
                   model.home() if s is None else np.asarray(s, dtype=float).copy(),
                   np.zeros(6), np.zeros(n))


@dataclass
class DynamicsQuantities:
    Mb: np.ndarray
    Ms: np.ndarray
    hb: np.ndarray
    hs: np.ndarray
    Jb: np.ndarray
    Js: np.ndarray
    Jdotnu: np.ndarray
    Jg: np.ndarray
    H: np.ndarray
    floating: bool
    mass: float
    gravity: float
    com: np.ndarray
    base_twist: np.ndarray  # (omega_B, pdot_B) of the root link, world frame
    contact_R: np.ndarray
    contact_p: np.ndarray
    nu: np.ndarray
    Ms_bar: Optional[np.ndarray] = None  # M_s plus reflected motor inertia
    s: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.Ms.shape[0]

    @property
    def nb(self) -> int:
        return self.Mb.shape[0]

    @property
    def nc(self) -> int:
        return self.contact_p.shape[0]

    @property
    def sdot(self) -> np.ndarray:
        return self.nu[self.nb:]

    @property
    def M(self) -> np.ndarray:
        nb, n = self.nb, self.n
        out = np.zeros((nb + n, nb + n))
        out[:nb, :nb] = self.Mb
        out[nb:, nb:] = self.Ms
        return out

    @property
    def h(self) -> np.ndarray:
        return np.concatenate([self.hb, self.hs])

    @property
    def J(self) -> np.ndarray:
        return np.hstack([self.Jb, self.Js])

    @property
    def B(self) -> np.ndarray:
        return np.vstack([np.zeros((self.nb, self.n)), np.eye(self.n)])

    @property
    def gravity_wrench(self) -> np.ndarray:
        """m g e3 lifted into the linear part of a momentum-rate 6-vector."""
        return np.concatenate([self.mass * self.gravity * E3, np.zeros(3)])


def compute_dynamics(model: RobotModel, state: RobotState) -> DynamicsQuantities:
    cm = compiled(model)
    n = model.n
    Rb = quat_to_matrix(state.base_quat)
    R, Pw, S, I6 = K.kinematics(Rb, np.asarray(state.base_pos, dtype=float),
                                np.asarray(state.s, dtype=float), *cm.kin_args())
    Mraw = K.crba(cm.parent, cm.order, S, I6)
    A = Mraw[:6, :6]
    F = Mraw[:6, 6:]
    m = A[3, 3]
    c = np.array([A[2, 4], A[0, 5], A[1, 3]]) / m  # A[:3, 3:] = m skew(c)
    Sc = skew(c)
    IG = A[:3, :3] - m * Sc @ Sc.T
    Acho = cho_factor(A, check_finite=False)
    AinvF = cho_solve(Acho, F, check_finite=False)
    Pinv = np.zeros((6, 6))
    Pinv[:3, 3:] = np.eye(3)
    Pinv[3:, :3] = np.eye(3)
    Pinv[3:, 3:] = Sc
    Mb = np.zeros((6, 6))
    Mb[:3, :3] = m * np.eye(3)
    Mb[3:, 3:] = IG
    sdot = np.asarray(state.sdot, dtype=float)
    floating = model.floating_base

    if floating:
        vB = np.asarray(state.vB, dtype=float)
        x = Pinv @ vB - AinvF @ sdot
    else:
        vB = np.zeros(6)
        x = np.zeros(6)
    r0, V, A0 = K.rnea(cm.parent, cm.order, S, I6, x, cm.g_off, sdot, np.zeros(n))
    Jg = Mb @ np.linalg.inv(Pinv) @ AinvF
    base_twist = np.concatenate([x[:3], x[3:] - skew(state.base_pos) @ x[:3]])
    nc = model.nc

    if floating:
        Ms = Mraw[6:, 6:] - F.T @ AinvF
        Ms = 0.5 * (Ms + Ms.T)
        IGdot = _composite_rate(V, I6)[:3, :3]
        cdot = vB[:3]
        Scd = skew(cdot)
        IGdot = IGdot - m * (Scd @ Sc.T + Sc @ Scd.T)
        omega_o = vB[3:]
        hb = np.concatenate([m * cm.g * E3, IGdot @ omega_o])
        hs = r0[6:] - AinvF.T @ r0[:6]
        H = Mb @ vB
        # root acceleration giving zero centroidal acceleration
        target = np.concatenate([IGdot @ omega_o + m * cm.g * (Sc @ E3), m * cm.g * E3])
        a_b = cho_solve(Acho, target - r0[:6], check_finite=False)
        cR, cp, Jraw, Jdotnu = K.contact_terms(R, Pw, S, V, A0, a_b - cm.g_off, cm.support,
                                               cm.contact_body, cm.contact_R, cm.contact_p)
        Jb = Jraw[:, :6] @ Pinv
        Js = Jraw[:, 6:] - Jraw[:, :6] @ AinvF
        if nc:
            U, sv, Vt = np.linalg.svd(Jb, full_matrices=False)
            if sv[-1] <= sv[0] * PINV_RCOND:
                raise RankError("contact Jacobian J_b is rank deficient (degenerate contact placement)")
            Jg = -Mb @ ((Vt.T / sv) @ U.T) @ Js
        Mb_out = Mb
    else:
        Ms = Mraw[6:, 6:].copy()
        hs = r0[6:]
        hb = np.zeros(0)
        cR, cp, Jraw, Jdotnu = K.contact_terms(R, Pw, S, V, A0, -cm.g_off, cm.support,
                                               cm.contact_body, cm.contact_R, cm.contact_p)
        Jb = np.zeros((6 * nc, 0))
        Js = Jraw[:, 6:]
        H = Jg @ sdot
        Mb_out = np.zeros((0, 0))

    nu = np.concatenate([vB if floating else np.zeros(0), sdot])
    return DynamicsQuantities(
        Mb=Mb_out, Ms=Ms, hb=hb, hs=hs, Jb=Jb, Js=Js, Jdotnu=Jdotnu, Jg=Jg, H=H,
        floating=floating, mass=m, gravity=cm.g, com=c, base_twist=base_twist,
        contact_R=cR, contact_p=cp, nu=nu, Ms_bar=reflected_inertia(model, Ms)[0],
        s=np.array(state.s, dtype=float),
        extras={"Mb_full": Mb, "AinvF": AinvF, "Pinv": Pinv, "M_raw": Mraw, "x": x})


def contact_constraint_residual(dq: DynamicsQuantities, nudot: np.ndarray) -> np.ndarray:
    """J nudot + Jdot nu."""
    nudot = np.asarray(nudot, dtype=float)
    if nudot.shape != (dq.nb + dq.n,):
        raise ValueError(f"nudot must have length {dq.nb + dq.n}")
    return dq.J @ nudot + dq.Jdotnu


def contact_pose_error(dq: DynamicsQuantities, anchors) -> np.ndarray:
    """Position and small-angle orientation drift of each contact frame
    relative to its anchor pose (R_a, p_a)."""
    err = np.zeros(6 * dq.nc)
    for k, (Ra, pa) in enumerate(anchors):
        err[6 * k:6 * k + 3] = dq.contact_p[k] - pa
        E = dq.contact_R[k] @ Ra.T
        W = 0.5 * (E - E.T)
        err[6 * k + 3:6 * k + 6] = [W[2, 1], W[0, 2], W[1, 0]]
    return err


def contact_anchors(dq: DynamicsQuantities):
    return [(dq.contact_R[k].copy(), dq.contact_p[k].copy()) for k in range(dq.nc)]


def _solve_mbar(dq: DynamicsQuantities, Ms_cho, rhs: np.ndarray) -> np.ndarray:
    nb = dq.nb
    out = np.empty_like(rhs)
    if nb:
        m = dq.Mb[0, 0]
        out[:3] = rhs[:3] / m
        out[3:6] = np.linalg.solve(dq.Mb[3:, 3:], rhs[3:6])
    out[nb:] = cho_solve(Ms_cho, rhs[nb:])
    return out


def constrained_solve(dq: DynamicsQuantities, Ms_bar: np.ndarray, joint_force: np.ndarray,
                      stabilization: Optional[np.ndarray] = None):
    """Solve  Mbar nudot + h = J^T f + B joint_force  with
    J nudot + Jdot nu + stabilization = 0.  Returns (nudot, f)."""
    nb = dq.nb
    try:
        Ms_cho = cho_factor(Ms_bar)
    except np.linalg.LinAlgError as exc:
        raise ConstraintSingularError("joint-space mass matrix not positive definite") from exc
    htil = dq.h.copy()
    htil[nb:] -= joint_force
    if dq.nc == 0:
        return _solve_mbar(dq, Ms_cho, -htil), np.zeros(0)
    J = dq.J
    MinvJT = _solve_mbar(dq, Ms_cho, J.T)
    G = J @ MinvJT
    rhs = J @ _solve_mbar(dq, Ms_cho, htil) - dq.Jdotnu
    if stabilization is not None:
        rhs = rhs - stabilization
    try:
        Gc = cho_factor(G)
        f = cho_solve(Gc, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConstraintSingularError("singular contact Gram matrix J Mbar^-1 J^T") from exc
    nudot = MinvJT @ f - _solve_mbar(dq, Ms_cho, htil)
    return nudot, f


def baumgarte_term(dq: DynamicsQuantities, anchors=None, alpha: float = 10.0) -> np.ndarray:
    stab = 2.0 * alpha * (dq.J @ dq.nu)
    if anchors is not None:
        stab = stab + alpha ** 2 * contact_pose_error(dq, anchors)
    return stab


def forward_dynamics_constrained(model: RobotModel, state: RobotState, u: np.ndarray,
                                 dq: Optional[DynamicsQuantities] = None, anchors=None,
                                 alpha: float = 10.0):
    """Constrained forward dynamics of the robot+motor plant.

    Solves Mbar nudot + h = J^T f + B u - B Kf_bar(sdot) sdot subject to the
    Baumgarte-stabilized contact constraint.  Returns (nudot, f).
    """
    if dq is None:
        dq = compute_dynamics(model, state)
    fq = friction_quantities(model, dq.Ms, dq.sdot)
    joint_force = np.asarray(u, dtype=float) - fq.Kf_bar @ dq.sdot
    stab = baumgarte_term(dq, anchors, alpha) if dq.nc else None
    return constrained_solve(dq, fq.Ms_bar, joint_force, stab)


def state_derivative(state: RobotState, dq: DynamicsQuantities, nudot: np.ndarray) -> np.ndarray:
    n = state.n
    out = np.zeros(13 + 2 * n)
    if dq.floating:
        out[0:3] = dq.base_twist[3:]
        out[3:7] = quat_derivative(state.base_quat, dq.base_twist[:3])
        out[7 + n:13 + n] = nudot[:6]
        out[13 + n:] = nudot[6:]
    else:
        out[13 + n:] = nudot
    out[7:7 + n] = state.sdot
    return out


def kinetic_energy(dq: DynamicsQuantities, Ms=None) -> float:
    Ms = dq.Ms if Ms is None else Ms
    vB = dq.nu[:dq.nb]
    return 0.5 * float(vB @ dq.Mb @ vB + dq.sdot @ Ms @ dq.sdot)


def potential_energy(dq: DynamicsQuantities) -> float:
    return dq.mass * dq.gravity * float(dq.com[2])


# ---------------------------------------------------------------------------
# raw root-twist coordinates used by the compiled plant


def _locked_terms(model: RobotModel, base_pos, base_quat, s):
    cm = compiled(model)
    Rb = quat_to_matrix(base_quat)
    _, _, S, I6 = K.kinematics(Rb, np.asarray(base_pos, dtype=float), np.asarray(s, dtype=float),
                               *cm.kin_args())
    Mraw = K.crba(cm.parent, cm.order, S, I6)
    A = Mraw[:6, :6]
    c = np.array([A[2, 4], A[0, 5], A[1, 3]]) / A[3, 3]
    return c, np.linalg.solve(A, Mraw[:6, 6:])


def raw_vector(model: RobotModel, state: RobotState) -> np.ndarray:
    """Plant vector (p_B, quat, s, x, sdot) with x the root twist (omega, v_O)."""
    n = model.n
    if not model.floating_base:
        return np.concatenate([np.zeros(7), state.s, np.zeros(6), state.sdot])
    c, AinvF = _locked_terms(model, state.base_pos, state.base_quat, state.s)
    vB = np.asarray(state.vB, dtype=float)
    x = np.concatenate([vB[3:], vB[:3] + skew(c) @ vB[3:]]) - AinvF @ state.sdot
    y = np.empty(13 + 2 * n)
    y[0:3] = state.base_pos
    y[3:7] = state.base_quat
    y[7:7 + n] = state.s
    y[7 + n:13 + n] = x
    y[13 + n:] = state.sdot
    return y


def state_from_raw(model: RobotModel, y: np.ndarray, base_pos=None, base_quat=None) -> RobotState:
    n = model.n
    s = y[7:7 + n].copy()
    sd = y[13 + n:].copy()
    if not model.floating_base:
        st = RobotState.home(model, s)
        st.sdot = sd
        return st
    pb, q = y[0:3].copy(), y[3:7].copy()
    c, AinvF = _locked_terms(model, pb, q, s)
    w = y[7 + n:10 + n] + AinvF[:3] @ sd
    v = y[10 + n:13 + n] + AinvF[3:] @ sd
    vB = np.concatenate([v - skew(c) @ w, w])
    return RobotState(pb, q, s, vB, sd)
