"""Joint friction and actuation algebra.

Motor-side friction is viscous plus a regularized Coulomb term,

    k_f(i) = k_v(i) + k_c(i) / (|e_i^T Gamma^{-1} sdot| + eps),

so that K_f(sdot) Gamma^{-1} sdot reproduces K_v thetadot + K_c sign(thetadot)
away from zero velocity.  Mapped through the transmission s = Gamma theta it
becomes the symmetric joint-side matrix Kf_bar = Gamma^{-T} K_f Gamma^{-1},
and the rotor inertias add the reflected inertia Gamma^{-T} I_m Gamma^{-1}
to the joint-space mass matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import RobotModel


@dataclass
class FrictionQuantities:
    Kf: np.ndarray
    Kf_bar: np.ndarray
    Ms_bar: np.ndarray
    reflected: np.ndarray


def _gamma_inv(gamma: np.ndarray) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape[0] and np.linalg.matrix_rank(gamma) < gamma.shape[0]:
        raise np.linalg.LinAlgError("Gamma is singular")
    return np.linalg.inv(gamma)


_CACHE: dict[int, tuple] = {}


def _actuation_cache(model: RobotModel):
    """(Gamma^-1, kv, kc, reflected inertia), computed once per model."""
    entry = _CACHE.get(id(model))
    if entry is None or entry[0] is not model:
        act = model.actuation
        gi = _gamma_inv(act.gamma)
        refl = gi.T @ act.im @ gi
        entry = (model, gi, np.diag(act.kv).copy(), np.diag(act.kc).copy(), 0.5 * (refl + refl.T))
        _CACHE[id(model)] = entry
    return entry[1:]


def friction_matrix(model: RobotModel, sdot: np.ndarray) -> np.ndarray:
    """Diagonal motor-side friction matrix K_f evaluated at joint velocity sdot."""
    gi, kv, kc, _ = _actuation_cache(model)
    theta_dot = gi @ np.asarray(sdot, dtype=float)
    return np.diag(kv + kc / (np.abs(theta_dot) + model.actuation.epsilon))


def coupled_friction(Kf: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    gi = _gamma_inv(gamma)
    out = gi.T @ Kf @ gi
    return 0.5 * (out + out.T)


def reflected_inertia(model: RobotModel, Ms: np.ndarray):
    """Return (Ms_bar, reflected) with reflected = Gamma^{-T} I_m Gamma^{-1}."""
    refl = _actuation_cache(model)[3]
    return Ms + refl, refl.copy()


def condition_number(M: np.ndarray) -> float:
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, M.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError("matrix is not symmetric")
    sv = np.linalg.svd(M, compute_uv=False)
    eig_min = np.linalg.eigvalsh(M)[0]
    if eig_min <= 0:
        raise ValueError("matrix is not positive definite")
    return float(sv[0] / sv[-1])


def friction_quantities(model: RobotModel, Ms: np.ndarray, sdot: np.ndarray) -> FrictionQuantities:
    Kf = friction_matrix(model, sdot)
    Ms_bar, refl = reflected_inertia(model, Ms)
    gi = _actuation_cache(model)[0]
    Kf_bar = gi.T @ Kf @ gi
    return FrictionQuantities(Kf=Kf, Kf_bar=0.5 * (Kf_bar + Kf_bar.T), Ms_bar=Ms_bar, reflected=refl)
