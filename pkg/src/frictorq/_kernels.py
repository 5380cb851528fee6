"""Compiled rigid-body recursions.

All spatial quantities are expressed in world-aligned Plücker coordinates
about the world origin, motion vectors ordered (angular, linear).  In these
coordinates composite inertias are plain sums and joint motion subspaces
need no frame transforms, which keeps the recursions short.

Body 0 is the root link; body j+1 is the child link of joint j.
"""

import numpy as np
from numba import njit

_CACHE = True


@njit(cache=_CACHE)
def _skew(v):
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@njit(cache=_CACHE)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=_CACHE)
def _mm3(A, B):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return out


@njit(cache=_CACHE)
def _mv3(A, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i, 0] * v[0] + A[i, 1] * v[1] + A[i, 2] * v[2]
    return out


@njit(cache=_CACHE)
def _mv6(A, v):
    out = np.zeros(6)
    for i in range(6):
        acc = 0.0
        for j in range(6):
            acc += A[i, j] * v[j]
        out[i] = acc
    return out


@njit(cache=_CACHE)
def _dot6(a, b):
    acc = 0.0
    for i in range(6):
        acc += a[i] * b[i]
    return acc


@njit(cache=_CACHE)
def _mm3_into(A, B, out):
    for i in range(3):
        a0, a1, a2 = A[i, 0], A[i, 1], A[i, 2]
        for j in range(3):
            out[i, j] = a0 * B[0, j] + a1 * B[1, j] + a2 * B[2, j]


@njit(cache=_CACHE)
def kinematics(Rb, pb, s, parent, order, Xrot, Xpos, axis, mass, com, inertia):
    """World poses, joint motion subspaces and spatial inertias of all bodies."""
    n = s.shape[0]
    R = np.empty((n + 1, 3, 3))
    P = np.empty((n + 1, 3))
    S = np.empty((n, 6))
    I6 = np.zeros((n + 1, 6, 6))
    Rj = np.empty((3, 3))
    Rot = np.empty((3, 3))
    T = np.empty((3, 3))
    R[0] = Rb
    P[0] = pb
    for k in range(n):
        j = order[k]
        pb_ = parent[j] + 1
        Rp = R[pb_]
        _mm3_into(Rp, Xrot[j], Rj)
        x = Xpos[j]
        for i in range(3):
            P[j + 1, i] = P[pb_, i] + Rp[i, 0] * x[0] + Rp[i, 1] * x[1] + Rp[i, 2] * x[2]
        ax = axis[j]
        a0 = Rj[0, 0] * ax[0] + Rj[0, 1] * ax[1] + Rj[0, 2] * ax[2]
        a1 = Rj[1, 0] * ax[0] + Rj[1, 1] * ax[1] + Rj[1, 2] * ax[2]
        a2 = Rj[2, 0] * ax[0] + Rj[2, 1] * ax[1] + Rj[2, 2] * ax[2]
        c = np.cos(s[j])
        sn = np.sin(s[j])
        tt = 1.0 - c
        x0, x1, x2 = ax[0], ax[1], ax[2]
        Rot[0, 0] = tt * x0 * x0 + c
        Rot[0, 1] = tt * x0 * x1 - sn * x2
        Rot[0, 2] = tt * x0 * x2 + sn * x1
        Rot[1, 0] = tt * x0 * x1 + sn * x2
        Rot[1, 1] = tt * x1 * x1 + c
        Rot[1, 2] = tt * x1 * x2 - sn * x0
        Rot[2, 0] = tt * x0 * x2 - sn * x1
        Rot[2, 1] = tt * x1 * x2 + sn * x0
        Rot[2, 2] = tt * x2 * x2 + c
        _mm3_into(Rj, Rot, R[j + 1])
        p0, p1, p2 = P[j + 1, 0], P[j + 1, 1], P[j + 1, 2]
        S[j, 0] = a0
        S[j, 1] = a1
        S[j, 2] = a2
        S[j, 3] = p1 * a2 - p2 * a1
        S[j, 4] = p2 * a0 - p0 * a2
        S[j, 5] = p0 * a1 - p1 * a0
    for b in range(n + 1):
        Rb_ = R[b]
        cl = com[b]
        c0 = P[b, 0] + Rb_[0, 0] * cl[0] + Rb_[0, 1] * cl[1] + Rb_[0, 2] * cl[2]
        c1 = P[b, 1] + Rb_[1, 0] * cl[0] + Rb_[1, 1] * cl[1] + Rb_[1, 2] * cl[2]
        c2 = P[b, 2] + Rb_[2, 0] * cl[0] + Rb_[2, 1] * cl[1] + Rb_[2, 2] * cl[2]
        _mm3_into(Rb_, inertia[b], T)
        m = mass[b]
        cc = c0 * c0 + c1 * c1 + c2 * c2
        cv = (c0, c1, c2)
        for i in range(3):
            for j in range(3):
                # R I R^T - m c c^T
                I6[b, i, j] = (T[i, 0] * Rb_[j, 0] + T[i, 1] * Rb_[j, 1] + T[i, 2] * Rb_[j, 2]
                               - m * cv[i] * cv[j])
            I6[b, i, i] += m * cc
            I6[b, 3 + i, 3 + i] = m
        # m skew(c) and its transpose
        I6[b, 0, 4] = -m * c2
        I6[b, 0, 5] = m * c1
        I6[b, 1, 3] = m * c2
        I6[b, 1, 5] = -m * c0
        I6[b, 2, 3] = -m * c1
        I6[b, 2, 4] = m * c0
        for i in range(3):
            for j in range(3):
                I6[b, 3 + j, i] = I6[b, i, 3 + j]
    return R, P, S, I6


@njit(cache=_CACHE)
def crba(parent, order, S, I6):
    """Floating-base joint-space inertia (6+n square) by composite bodies."""
    n = S.shape[0]
    Ic = I6.copy()
    for k in range(n - 1, -1, -1):
        j = order[k]
        Ic[parent[j] + 1] += Ic[j + 1]
    M = np.zeros((6 + n, 6 + n))
    M[:6, :6] = Ic[0]
    for j in range(n):
        F = _mv6(Ic[j + 1], S[j])
        M[:6, 6 + j] = F
        M[6 + j, :6] = F
        i = j
        while i >= 0:
            val = _dot6(S[i], F)
            M[6 + i, 6 + j] = val
            M[6 + j, 6 + i] = val
            i = parent[i]
    return M


@njit(cache=_CACHE)
def _body_force(I, v, a, out):
    """out = I a + crf(v) I v, written without temporaries."""
    Iv = np.empty(6)
    for i in range(6):
        acc_a = 0.0
        acc_v = 0.0
        for j in range(6):
            acc_a += I[i, j] * a[j]
            acc_v += I[i, j] * v[j]
        out[i] = acc_a
        Iv[i] = acc_v
    w0, w1, w2, u0, u1, u2 = v[0], v[1], v[2], v[3], v[4], v[5]
    n0, n1, n2, f0, f1, f2 = Iv[0], Iv[1], Iv[2], Iv[3], Iv[4], Iv[5]
    out[0] += w1 * n2 - w2 * n1 + u1 * f2 - u2 * f1
    out[1] += w2 * n0 - w0 * n2 + u2 * f0 - u0 * f2
    out[2] += w0 * n1 - w1 * n0 + u0 * f1 - u1 * f0
    out[3] += w1 * f2 - w2 * f1
    out[4] += w2 * f0 - w0 * f2
    out[5] += w0 * f1 - w1 * f0


@njit(cache=_CACHE)
def rnea(parent, order, S, I6, v0, a0, sd, sdd):
    """Recursive Newton-Euler.  Returns generalized forces (base wrench, joint
    torques), body velocities and body accelerations."""
    n = S.shape[0]
    V = np.empty((n + 1, 6))
    A = np.empty((n + 1, 6))
    f = np.empty((n + 1, 6))
    V[0] = v0
    A[0] = a0
    _body_force(I6[0], V[0], A[0], f[0])
    for k in range(n):
        j = order[k]
        b = j + 1
        p = parent[j] + 1
        q = sd[j]
        for i in range(6):
            V[b, i] = V[p, i] + S[j, i] * q
            A[b, i] = A[p, i] + S[j, i] * sdd[j]
        # crm(V_b) (S_j q)
        w0, w1, w2, u0, u1, u2 = V[b, 0], V[b, 1], V[b, 2], V[b, 3], V[b, 4], V[b, 5]
        m0, m1, m2 = S[j, 0] * q, S[j, 1] * q, S[j, 2] * q
        l0, l1, l2 = S[j, 3] * q, S[j, 4] * q, S[j, 5] * q
        A[b, 0] += w1 * m2 - w2 * m1
        A[b, 1] += w2 * m0 - w0 * m2
        A[b, 2] += w0 * m1 - w1 * m0
        A[b, 3] += u1 * m2 - u2 * m1 + w1 * l2 - w2 * l1
        A[b, 4] += u2 * m0 - u0 * m2 + w2 * l0 - w0 * l2
        A[b, 5] += u0 * m1 - u1 * m0 + w0 * l1 - w1 * l0
        _body_force(I6[b], V[b], A[b], f[b])
    tau = np.empty(6 + n)
    for k in range(n - 1, -1, -1):
        j = order[k]
        b = j + 1
        tau[6 + j] = _dot6(S[j], f[b])
        for i in range(6):
            f[parent[j] + 1, i] += f[b, i]
    tau[:6] = f[0]
    return tau, V, A


@njit(cache=_CACHE)
def contact_jacobian(S, support, body, pos):
    """Jacobian (6 x 6+n) of a frame at world point ``pos`` on ``body``.

    Rows are (linear velocity of the point, angular velocity), columns the
    root spatial velocity followed by joint rates."""
    n = S.shape[0]
    J = np.zeros((6, 6 + n))
    Sp = _skew(pos)
    for i in range(3):
        J[i, 3 + i] = 1.0
        J[3 + i, i] = 1.0
    J[:3, :3] = -Sp
    for j in range(n):
        if support[body, j]:
            J[:3, 6 + j] = S[j, 3:] - _cross(pos, S[j, :3])
            J[3:, 6 + j] = S[j, :3]
    return J


@njit(cache=_CACHE)
def _fixed_accel(Rb, pb, s, sd, tau_m, parent, order, Xrot, Xpos, axis, mass, com, inertia,
                 gamma_inv, im, kv, kc, eps, g):
    n = s.shape[0]
    R, P, S, I6 = kinematics(Rb, pb, s, parent, order, Xrot, Xpos, axis, mass, com, inertia)
    M = crba(parent, order, S, I6)
    a0 = np.zeros(6)
    a0[5] = g
    tau, V, A = rnea(parent, order, S, I6, np.zeros(6), a0, sd, np.zeros(n))
    thd = gamma_inv @ sd
    kf = kv + kc / (np.abs(thd) + eps)
    Mbar = M[6:, 6:] + _congruence(gamma_inv, im)
    rhs = gamma_inv.T @ tau_m - tau[6:] - _congruence(gamma_inv, kf) @ sd
    return _chol_solve(_cholesky(Mbar), rhs)


@njit(cache=_CACHE)
def fixed_rk4(Rb, pb, s, sd, tau_m, dt, nsteps, parent, order, Xrot, Xpos, axis, mass, com,
              inertia, gamma_inv, im, kv, kc, eps, g):
    """``nsteps`` RK4 steps of the fixed-base robot+motor plant at constant
    motor torque."""
    s = s.copy()
    sd = sd.copy()
    for _ in range(nsteps):
        k1v = _fixed_accel(Rb, pb, s, sd, tau_m, parent, order, Xrot, Xpos, axis, mass, com,
                           inertia, gamma_inv, im, kv, kc, eps, g)
        k1p = sd
        k2p = sd + 0.5 * dt * k1v
        k2v = _fixed_accel(Rb, pb, s + 0.5 * dt * k1p, k2p, tau_m, parent, order, Xrot, Xpos, axis,
                           mass, com, inertia, gamma_inv, im, kv, kc, eps, g)
        k3p = sd + 0.5 * dt * k2v
        k3v = _fixed_accel(Rb, pb, s + 0.5 * dt * k2p, k3p, tau_m, parent, order, Xrot, Xpos, axis,
                           mass, com, inertia, gamma_inv, im, kv, kc, eps, g)
        k4p = sd + dt * k3v
        k4v = _fixed_accel(Rb, pb, s + dt * k3p, k4p, tau_m, parent, order, Xrot, Xpos, axis,
                           mass, com, inertia, gamma_inv, im, kv, kc, eps, g)
        s = s + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        sd = sd + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return s, sd


@njit(cache=_CACHE)
def contact_terms(R, P, S, V, A, a_corr, support, contact_body, cR_local, cp_local):
    """Contact frame poses, raw Jacobians and Jdot*nu.

    ``A`` are body accelerations from a bias RNEA pass; ``a_corr`` is added to
    every body acceleration (removes the gravity offset and applies the root
    acceleration of interest)."""
    nc = contact_body.shape[0]
    n = S.shape[0]
    cR = np.empty((nc, 3, 3))
    cp = np.empty((nc, 3))
    J = np.empty((6 * nc, 6 + n))
    Jdn = np.empty(6 * nc)
    for k in range(nc):
        b = contact_body[k]
        cR[k] = _mm3(R[b], cR_local[k])
        p = P[b] + _mv3(R[b], cp_local[k])
        cp[k] = p
        J[6 * k:6 * k + 6] = contact_jacobian(S, support, b, p)
        a = A[b] + a_corr
        w = V[b, :3]
        vO = V[b, 3:]
        Jdn[6 * k:6 * k + 3] = a[3:] + _cross(a[:3], p) + _cross(w, vO + _cross(w, p))
        Jdn[6 * k + 3:6 * k + 6] = a[:3]
    return cR, cp, J, Jdn


@njit(cache=_CACHE)
def quat_matrix(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1 - 2 * (y * y + z * z)
    R[0, 1] = 2 * (x * y - w * z)
    R[0, 2] = 2 * (x * z + w * y)
    R[1, 0] = 2 * (x * y + w * z)
    R[1, 1] = 1 - 2 * (x * x + z * z)
    R[1, 2] = 2 * (y * z - w * x)
    R[2, 0] = 2 * (x * z - w * y)
    R[2, 1] = 2 * (y * z + w * x)
    R[2, 2] = 1 - 2 * (x * x + y * y)
    return R


@njit(cache=_CACHE)
def _matvec(A, x):
    m, k = A.shape
    out = np.zeros(m)
    for i in range(m):
        acc = 0.0
        for j in range(k):
            acc += A[i, j] * x[j]
        out[i] = acc
    return out


@njit(cache=_CACHE)
def _matvec_t(A, x):
    """A^T x."""
    m, k = A.shape
    out = np.zeros(k)
    for i in range(m):
        xi = x[i]
        for j in range(k):
            out[j] += A[i, j] * xi
    return out


@njit(cache=_CACHE)
def _cholesky(M):
    """Lower Cholesky factor; small dense matrices only."""
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        d = M[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if d <= 0.0:
            d = np.nan
        L[j, j] = np.sqrt(d)
        inv = 1.0 / L[j, j]
        for i in range(j + 1, n):
            acc = M[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc * inv
    return L


@njit(cache=_CACHE)
def _forward(L, B):
    """L^-1 B for lower-triangular L; B is (n, m)."""
    n, m = B.shape
    X = B.copy()
    for c in range(m):
        for i in range(n):
            acc = X[i, c]
            for k in range(i):
                acc -= L[i, k] * X[k, c]
            X[i, c] = acc / L[i, i]
    return X


@njit(cache=_CACHE)
def _backward(L, B):
    """L^-T B for lower-triangular L."""
    n, m = B.shape
    X = B.copy()
    for c in range(m):
        for i in range(n - 1, -1, -1):
            acc = X[i, c]
            for k in range(i + 1, n):
                acc -= L[k, i] * X[k, c]
            X[i, c] = acc / L[i, i]
    return X


@njit(cache=_CACHE)
def _chol_solve(L, b):
    return _backward(L, _forward(L, b.reshape(-1, 1)))[:, 0]


@njit(cache=_CACHE)
def _congruence(gi, d):
    """gi^T diag(d) gi."""
    n = gi.shape[0]
    out = np.zeros((n, n))
    for k in range(n):
        dk = d[k]
        if dk == 0.0:
            continue
        for i in range(n):
            gki = gi[k, i] * dk
            if gki == 0.0:
                continue
            for j in range(n):
                out[i, j] += gki * gi[k, j]
    return out


@njit(cache=_CACHE)
def floating_accel(y, n, tau_m, anchor_R, anchor_p, alpha, parent, order, Xrot, Xpos, axis,
                   mass, com, inertia, gamma_inv, im, kv, kc, eps, g, support, contact_body,
                   cR_local, cp_local):
    """Raw-coordinate constrained dynamics of the floating robot+motor plant.

    ``y`` = (p_B, quat, s, x, sdot) with x the root twist (omega, v_O).
    Returns (dy, nudot_raw, f)."""
    pb = y[0:3]
    q = y[3:7]
    s = y[7:7 + n]
    x = y[7 + n:13 + n]
    sd = y[13 + n:13 + 2 * n]
    Rb = quat_matrix(q / np.sqrt(q @ q))
    R, P, S, I6 = kinematics(Rb, pb, s, parent, order, Xrot, Xpos, axis, mass, com, inertia)
    M = crba(parent, order, S, I6)
    a0 = np.zeros(6)
    a0[5] = g
    r, V, A = rnea(parent, order, S, I6, x, a0, sd, np.zeros(n))
    thd = gamma_inv @ sd
    kf = kv + kc / (np.abs(thd) + eps)
    Kfb = _congruence(gamma_inv, kf)
    M[6:, 6:] += _congruence(gamma_inv, im)
    rhs = -r
    rhs[6:] += gamma_inv.T @ tau_m - Kfb @ sd
    nc = contact_body.shape[0]
    L = _cholesky(M)
    nu = np.empty(6 + n)
    nu[:6] = x
    nu[6:] = sd
    if nc > 0:
        cR, cp, J, Jdn = contact_terms(R, P, S, V, A, -a0, support, contact_body, cR_local, cp_local)
        Y = _forward(L, J.T.copy())
        YT = np.ascontiguousarray(Y.T)
        G = YT @ Y
        z = _forward(L, rhs.reshape(-1, 1))[:, 0]
        stab = 2.0 * alpha * (J @ nu)
        for k in range(nc):
            stab[6 * k:6 * k + 3] += alpha * alpha * (cp[k] - anchor_p[k])
            E = _mm3(cR[k], anchor_R[k].T)
            stab[6 * k + 3] += alpha * alpha * 0.5 * (E[2, 1] - E[1, 2])
            stab[6 * k + 4] += alpha * alpha * 0.5 * (E[0, 2] - E[2, 0])
            stab[6 * k + 5] += alpha * alpha * 0.5 * (E[1, 0] - E[0, 1])
        f = _chol_solve(_cholesky(G), -Jdn - stab - _matvec(YT, z))
        rhs = rhs + _matvec_t(J, f)
    else:
        f = np.zeros(0)
    nud = _chol_solve(L, rhs)
    dy = np.empty_like(y)
    w = x[:3]
    dy[0:3] = x[3:] + _cross(w, pb)
    dy[3] = 0.5 * (-w[0] * q[1] - w[1] * q[2] - w[2] * q[3])
    dy[4] = 0.5 * (w[0] * q[0] + w[1] * q[3] - w[2] * q[2])
    dy[5] = 0.5 * (-w[0] * q[3] + w[1] * q[0] + w[2] * q[1])
    dy[6] = 0.5 * (w[0] * q[2] - w[1] * q[1] + w[2] * q[0])
    dy[7:7 + n] = sd
    dy[7 + n:] = nud
    return dy, nud, f


@njit(cache=_CACHE)
def floating_rk4(y, n, tau_m, dt, nsteps, anchor_R, anchor_p, alpha, parent, order, Xrot, Xpos,
                 axis, mass, com, inertia, gamma_inv, im, kv, kc, eps, g, support, contact_body,
                 cR_local, cp_local):
    """``nsteps`` RK4 steps at constant motor torque; the quaternion is
    renormalized after every step."""
    y = y.copy()
    for _ in range(nsteps):
        k1 = floating_accel(y, n, tau_m, anchor_R, anchor_p, alpha, parent, order, Xrot, Xpos,
                            axis, mass, com, inertia, gamma_inv, im, kv, kc, eps, g, support,
                            contact_body, cR_local, cp_local)[0]
        k2 = floating_accel(y + 0.5 * dt * k1, n, tau_m, anchor_R, anchor_p, alpha, parent, order,
                            Xrot, Xpos, axis, mass, com, inertia, gamma_inv, im, kv, kc, eps, g,
                            support, contact_body, cR_local, cp_local)[0]
        k3 = floating_accel(y + 0.5 * dt * k2, n, tau_m, anchor_R, anchor_p, alpha, parent, order,
                            Xrot, Xpos, axis, mass, com, inertia, gamma_inv, im, kv, kc, eps, g,
                            support, contact_body, cR_local, cp_local)[0]
        k4 = floating_accel(y + dt * k3, n, tau_m, anchor_R, anchor_p, alpha, parent, order,
                            Xrot, Xpos, axis, mass, com, inertia, gamma_inv, im, kv, kc, eps, g,
                            support, contact_body, cR_local, cp_local)[0]
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        qn = np.sqrt(y[3:7] @ y[3:7])
        y[3:7] = y[3:7] / qn
        if not np.all(np.isfinite(y)):
            break
    return y


@njit(cache=_CACHE)
def _fixed_closed_loop_accel(s, sd, t, ef, Kp, Kd, s_off, amp, omega, parent, order, Xrot, Xpos,
                             axis, mass, com, inertia, gamma_inv, im, kv, kc, eps, g):
    """Joint acceleration with the joint-space law evaluated at the exact
    state: EF (ef=True) or computed torque with ideal friction cancellation."""
    n = s.shape[0]
    R, P, S, I6 = kinematics(np.eye(3), np.zeros(3), s, parent, order, Xrot, Xpos, axis, mass,
                             com, inertia)
    M = crba(parent, order, S, I6)
    a0 = np.zeros(6)
    a0[5] = g
    h, V, A = rnea(parent, order, S, I6, np.zeros(6), a0, sd, np.zeros(n))
    h = h[6:]
    Mbar = M[6:, 6:] + _congruence(gamma_inv, im)
    kf = kv + kc / (np.abs(gamma_inv @ sd) + eps)
    Kfb = _congruence(gamma_inv, kf)
    s_d = s_off + amp * np.sin(omega * t)
    sd_d = amp * omega * np.cos(omega * t)
    sdd_d = -amp * omega * omega * np.sin(omega * t)
    cmd = h + Mbar @ sdd_d - Kp @ (s - s_d) - Kd @ (sd - sd_d)
    if ef:
        force = cmd + Kfb @ sd_d - Kfb @ sd
    else:
        force = cmd
    return _chol_solve(_cholesky(Mbar), force - h)


@njit(cache=_CACHE)
def fixed_closed_loop_rk4(s, sd, t, dt, nsteps, ef, Kp, Kd, s_off, amp, omega, parent, order,
                          Xrot, Xpos, axis, mass, com, inertia, gamma_inv, im, kv, kc, eps, g):
    """RK4 of the fixed-base closed loop under a joint sinusoid reference
    s_d = s_off + amp sin(omega t), controller inside every stage."""
    s = s.copy()
    sd = sd.copy()
    for i in range(nsteps):
        tk = t + i * dt
        k1v = _fixed_closed_loop_accel(s, sd, tk, ef, Kp, Kd, s_off, amp, omega, parent, order,
                                       Xrot, Xpos, axis, mass, com, inertia, gamma_inv, im, kv,
                                       kc, eps, g)
        k1p = sd
        k2p = sd + 0.5 * dt * k1v
        k2v = _fixed_closed_loop_accel(s + 0.5 * dt * k1p, k2p, tk + 0.5 * dt, ef, Kp, Kd, s_off,
                                       amp, omega, parent, order, Xrot, Xpos, axis, mass, com,
                                       inertia, gamma_inv, im, kv, kc, eps, g)
        k3p = sd + 0.5 * dt * k2v
        k3v = _fixed_closed_loop_accel(s + 0.5 * dt * k2p, k3p, tk + 0.5 * dt, ef, Kp, Kd, s_off,
                                       amp, omega, parent, order, Xrot, Xpos, axis, mass, com,
                                       inertia, gamma_inv, im, kv, kc, eps, g)
        k4p = sd + dt * k3v
        k4v = _fixed_closed_loop_accel(s + dt * k3p, k4p, tk + dt, ef, Kp, Kd, s_off, amp, omega,
                                       parent, order, Xrot, Xpos, axis, mass, com, inertia,
                                       gamma_inv, im, kv, kc, eps, g)
        s = s + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        sd = sd + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return s, sd
