"""Independent reference computations used by the tests.

Nothing here calls the recursions in frictorq; kinematics are rebuilt from
the model fields with plain numpy and scipy, velocities come from central
differences of poses, and constrained dynamics from dense KKT solves.
"""

import numpy as np
from scipy.spatial.transform import Rotation

FD_H = 1e-6


def _rpy(rpy):
    # fixed-axis roll, pitch, yaw
    return Rotation.from_euler("xyz", rpy).as_matrix()


def _axis_angle(axis, angle):
    return Rotation.from_rotvec(np.asarray(axis, dtype=float) * angle).as_matrix()


def quat_wxyz_to_matrix(q):
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_matrix()


def forward_kinematics(model, base_R, base_p, s):
    """World (R, p) of every link frame, keyed by link name."""
    children = {j.child for j in model.joints}
    root = [lk.name for lk in model.links if lk.name not in children][0]
    poses = {root: (np.asarray(base_R, dtype=float), np.asarray(base_p, dtype=float))}
    pending = list(enumerate(model.joints))
    while pending:
        rest = []
        for i, j in pending:
            if j.parent not in poses:
                rest.append((i, j))
                continue
            Rp, pp = poses[j.parent]
            Rj = Rp @ _rpy(j.origin_rpy)
            poses[j.child] = (Rj @ _axis_angle(j.axis, s[i]), pp + Rp @ j.origin_xyz)
        pending = rest
    return poses


def link_com(model, poses):
    return {lk.name: poses[lk.name][1] + poses[lk.name][0] @ lk.com for lk in model.links}


def total_com(model, poses):
    coms = link_com(model, poses)
    m = sum(lk.mass for lk in model.links)
    return sum(lk.mass * coms[lk.name] for lk in model.links) / m


def _vee(W):
    return np.array([W[2, 1], W[0, 2], W[1, 0]])


def _base_path(base_R, base_p, w, v0, t):
    """Base pose after moving for time t with constant world twist
    (w, v_O) about the world origin."""
    Rt = _axis_angle(w, t) if np.any(w) else np.eye(3)
    # a point fixed to the base moves as p(t) = Rt p + c(t); the origin
    # velocity of the rigid motion is v0, so c'(0) = v0
    if np.any(w):
        th = np.linalg.norm(w) * t
        k = w / np.linalg.norm(w)
        K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        integ = t * np.eye(3) + (1 - np.cos(th)) / np.linalg.norm(w) * K + (t - np.sin(th) / np.linalg.norm(w)) * K @ K
        c = integ @ v0
    else:
        c = v0 * t
    return Rt @ base_R, Rt @ base_p + c


def link_velocities(model, base_R, base_p, s, twist, sdot, h=FD_H):
    """Per-link (CoM velocity, angular velocity) from central differences of
    the forward kinematics along the motion (root twist, sdot)."""
    w, v0 = np.asarray(twist[:3], dtype=float), np.asarray(twist[3:], dtype=float)
    out = {}
    ends = []
    for sign in (1.0, -1.0):
        Rb, pb = _base_path(base_R, base_p, w, v0, sign * h)
        poses = forward_kinematics(model, Rb, pb, s + sign * h * np.asarray(sdot))
        ends.append((poses, link_com(model, poses)))
    (pp, cp), (pm, cm) = ends
    for lk in model.links:
        v = (cp[lk.name] - cm[lk.name]) / (2 * h)
        Rd = (pp[lk.name][0] - pm[lk.name][0]) / (2 * h)
        R0 = forward_kinematics(model, base_R, base_p, s)[lk.name][0]
        out[lk.name] = (v, _vee(Rd @ R0.T))
    return out


def kinetic_energy(model, base_R, base_p, s, twist, sdot):
    vel = link_velocities(model, base_R, base_p, s, twist, sdot)
    poses = forward_kinematics(model, base_R, base_p, s)
    ke = 0.0
    for lk in model.links:
        v, w = vel[lk.name]
        R = poses[lk.name][0]
        ke += 0.5 * lk.mass * v @ v + 0.5 * w @ (R @ lk.inertia @ R.T) @ w
    return ke


def mass_matrix_from_energy(model, base_R, base_p, s, floating):
    """Mass matrix in (root twist, sdot) coordinates from the kinetic energy
    by polarization: M_ij = T(e_i + e_j) - T(e_i) - T(e_j)."""
    n = model.n
    nb = 6 if floating else 0
    N = nb + n

    def T(v):
        twist = v[:6] if floating else np.zeros(6)
        return kinetic_energy(model, base_R, base_p, s, twist, v[nb:])

    E = np.eye(N)
    diag = np.array([T(E[i]) for i in range(N)])
    M = np.zeros((N, N))
    for i in range(N):
        M[i, i] = 2 * diag[i]
        for j in range(i + 1, N):
            M[i, j] = M[j, i] = T(E[i] + E[j]) - diag[i] - diag[j]
    return M


def centroidal_momentum(model, base_R, base_p, s, twist, sdot):
    """(linear momentum, angular momentum about the CoM)."""
    vel = link_velocities(model, base_R, base_p, s, twist, sdot)
    poses = forward_kinematics(model, base_R, base_p, s)
    coms = link_com(model, poses)
    c = total_com(model, poses)
    L = np.zeros(3)
    K = np.zeros(3)
    for lk in model.links:
        v, w = vel[lk.name]
        R = poses[lk.name][0]
        L += lk.mass * v
        K += lk.mass * np.cross(coms[lk.name] - c, v) + R @ lk.inertia @ R.T @ w
    return L, K


def two_link_gravity(s, g=9.81):
    """Gravity torques of the pendulum2 fixture, derived by hand: link1 CoM
    0.1 m below joint 1 (0.5 kg), link2 CoM on joint 2 which is 0.2 m below
    joint 1 (0.3 kg), both axes along y.  V = -g (0.05 + 0.06) cos s1."""
    return np.array([g * (0.5 * 0.1 + 0.3 * 0.2) * np.sin(s[0]), 0.0])


def kkt_solve(M, h, J, Jdotnu, joint_force, nb, stab=None):
    """Dense solve of [M -J^T; J 0] [nudot; f] = [B joint_force - h; -Jdot nu - stab]."""
    N = M.shape[0]
    k = J.shape[0]
    rhs_top = -h.copy()
    rhs_top[nb:] += joint_force
    rhs_bot = -Jdotnu - (0 if stab is None else stab)
    K = np.block([[M, -J.T], [J, np.zeros((k, k))]])
    sol = np.linalg.solve(K, np.concatenate([rhs_top, rhs_bot]))
    return sol[:N], sol[N:]


def cone_rows_by_hand(mu, lx, ly, mz, f_min, w):
    """Constraint values g(w) <= 0 for one contact wrench w expressed in the
    contact frame, facet by facet."""
    fx, fy, fz, mx, my, tz = w
    a = mu / np.sqrt(2)
    return np.array([
        f_min - fz,
        fx - a * fz, -fx - a * fz, fy - a * fz, -fy - a * fz,
        -my - lx * fz, my - lx * fz,
        mx - ly * fz, -mx - ly * fz,
        tz - mz * fz, -tz - mz * fz,
    ])
