"""Contact wrench constraints and the redundancy-resolution QP.

Each contact wrench is (force, moment) in world axes, moment about the
contact frame origin.  Constraints are written in the contact frame: a
four-facet friction pyramid, a minimum normal force, center-of-pressure
bounds for the rectangular sole and a torsional moment bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import quadprog
from scipy.linalg import null_space
from scipy.optimize import linprog

from .model import ContactSpec

ROWS_PER_CONTACT = 11
MAX_ITER = 200
_REG = 1e-10

_FACETS = ("normal force >= f_min",
           "friction +x", "friction -x", "friction +y", "friction -y",
           "CoP +x", "CoP -x", "CoP +y", "CoP -y",
           "torsion +z", "torsion -z")


class QPInfeasibleError(RuntimeError):
    def __init__(self, message: str, constraint: str | None = None, violation: float = 0.0):
        super().__init__(message)
        self.constraint = constraint
        self.violation = violation


class QPMaxIterError(RuntimeError):
    pass


@dataclass
class QuadraticCost:
    """The cost |L f + c|^2 over contact wrenches f."""
    L: np.ndarray
    c: np.ndarray

    def __call__(self, f) -> float:
        r = self.L @ f + self.c
        return float(r @ r)


def _local_rows(spec: ContactSpec, shrink: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    scale = 1.0 - shrink
    mu = scale * spec.mu / np.sqrt(2.0)
    lx, ly = scale * np.asarray(spec.half_extents, dtype=float)
    mz = scale * spec.torsional_mu
    # columns: Fx Fy Fz Mx My Mz in the contact frame
    A = np.zeros((ROWS_PER_CONTACT, 6))
    b = np.zeros(ROWS_PER_CONTACT)
    A[0, 2] = -1.0
    b[0] = -spec.f_min
    A[1, [0, 2]] = (1.0, -mu)
    A[2, [0, 2]] = (-1.0, -mu)
    A[3, [1, 2]] = (1.0, -mu)
    A[4, [1, 2]] = (-1.0, -mu)
    # CoP_x = -My/Fz within [-lx, lx], CoP_y = Mx/Fz within [-ly, ly]
    A[5, [4, 2]] = (-1.0, -lx)
    A[6, [4, 2]] = (1.0, -lx)
    A[7, [3, 2]] = (1.0, -ly)
    A[8, [3, 2]] = (-1.0, -ly)
    A[9, [5, 2]] = (1.0, -mz)
    A[10, [5, 2]] = (-1.0, -mz)
    return A, b


def friction_cone_constraints(cones: list[ContactSpec], orientations,
                              shrink: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Stacked A f <= b for all contacts.  ``orientations[k]`` rotates
    contact-frame vectors into world axes.  ``shrink`` in [0, 1) scales the
    friction coefficients, sole half extents and torsional bound down by
    (1 - shrink), a safety factor for planning."""
    if not 0.0 <= shrink < 1.0:
        raise ValueError("shrink must be in [0, 1)")
    nc = len(cones)
    A = np.zeros((ROWS_PER_CONTACT * nc, 6 * nc))
    b = np.zeros(ROWS_PER_CONTACT * nc)
    for k, (spec, R) in enumerate(zip(cones, orientations)):
        Al, bl = _local_rows(spec, shrink)
        R = np.asarray(R, dtype=float)
        rows = slice(ROWS_PER_CONTACT * k, ROWS_PER_CONTACT * (k + 1))
        A[rows, 6 * k:6 * k + 3] = Al[:, :3] @ R.T
        A[rows, 6 * k + 3:6 * k + 6] = Al[:, 3:] @ R.T
        b[rows] = bl
    return A, b


def constraint_names(cones: list[ContactSpec]) -> list[str]:
    return [f"{spec.link}: {facet}" for spec in cones for facet in _FACETS]


def violated_constraints(A, b, f, cones, tol: float = 1e-9) -> list[tuple[str, float]]:
    """(name, violation) of every row with A f - b > tol, worst first."""
    viol = A @ f - b
    names = constraint_names(cones)
    idx = [i for i in np.argsort(-viol, kind="stable") if viol[i] > tol]
    return [(names[i], float(viol[i])) for i in idx]


def _basis(N_b: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (N_b + N_b.T))
    return V[:, w > 0.5]


def solve_redundancy_qp(cost: QuadraticCost, A: np.ndarray, b: np.ndarray, N_b: np.ndarray,
                        f_base: np.ndarray, names: list[str] | None = None,
                        basis: np.ndarray | None = None) -> np.ndarray:
    """Minimize cost(f_base + N_b f0) subject to A (f_base + N_b f0) <= b.

    Returns f0 in range(N_b).  Solved with the Goldfarb-Idnani dual
    active-set method over coordinates of an orthonormal basis of range(N_b).
    """
    Z = _basis(N_b) if basis is None else basis
    f_base = np.asarray(f_base, dtype=float)
    if Z.shape[1] == 0:
        viol = A @ f_base - b
        if viol.size and viol.max() > 1e-9:
            i = int(np.argmax(viol))
            raise QPInfeasibleError("QP infeasible: no redundancy and constraints violated",
                                    names[i] if names else str(i), float(viol[i]))
        return np.zeros_like(f_base)
    LZ = cost.L @ Z
    r0 = cost.L @ f_base + cost.c
    G = LZ.T @ LZ
    G = 0.5 * (G + G.T) + _REG * max(1.0, np.trace(G) / G.shape[0]) * np.eye(G.shape[0])
    a = -LZ.T @ r0
    if A.shape[0] == 0:
        y = np.linalg.solve(G, a)
        return Z @ y
    C = -(A @ Z)
    bq = -(b - A @ f_base)
    try:
        y, _, _, iters, _, _ = quadprog.solve_qp(G, a, C.T.copy(), bq, 0)
    except ValueError as exc:
        if "inconsistent" not in str(exc):
            raise
        name, worst = _most_violated(A @ Z, b - A @ f_base, names)
        raise QPInfeasibleError(f"QP infeasible: most violated constraint {name} by {worst:.6g}",
                                name, worst) from None
    if iters[0] > MAX_ITER:
        raise QPMaxIterError(f"QP did not converge within {MAX_ITER} iterations")
    return Z @ y


def _most_violated(AZ: np.ndarray, rhs: np.ndarray, names):
    """Least-infeasible point (minimize the largest violation t of
    AZ y <= rhs + t) and the constraint that attains it."""
    m, k = AZ.shape
    c = np.zeros(k + 1)
    c[-1] = 1.0
    A_ub = np.hstack([AZ, -np.ones((m, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=rhs, bounds=[(None, None)] * k + [(0, None)], method="highs")
    y = res.x[:k] if res.status == 0 else np.zeros(k)
    viol = AZ @ y - rhs
    i = int(np.argmax(viol))
    return (names[i] if names else f"row {i}"), float(viol[i])


def nullspace_basis(A: np.ndarray) -> np.ndarray:
    return null_space(A, rcond=1e-8)
