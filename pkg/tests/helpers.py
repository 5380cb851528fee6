"""State generators and small builders shared by the tests."""

import numpy as np
from scipy.linalg import null_space

from frictorq.control_fixed import JointGains, JointReference
from frictorq.control_floating import ControllerState, MomentumGains, MomentumReference
from frictorq.dynamics import RobotState, compute_dynamics, matrix_to_quat, raw_vector, state_from_raw
from frictorq.model import model_from_dict, model_to_dict


def random_fixed_state(model, rng, vel=1.0):
    st = RobotState.home(model, model.home() + rng.uniform(-1.0, 1.0, model.n))
    st.sdot = rng.uniform(-vel, vel, model.n)
    return st


def random_contact_state(model, rng, spread=0.15, vel=0.5):
    """Floating state with perturbed posture and base orientation, and a
    velocity consistent with the contacts (J nu = 0)."""
    st = RobotState.home(model, model.home() + rng.uniform(-spread, spread, model.n))
    axis = rng.normal(size=3)
    ang = rng.uniform(0, 0.1)
    from scipy.spatial.transform import Rotation
    R = Rotation.from_rotvec(axis / np.linalg.norm(axis) * ang).as_matrix()
    st.base_quat = matrix_to_quat(R)
    st.base_pos = st.base_pos + rng.uniform(-0.05, 0.05, 3)
    dq = compute_dynamics(model, st)
    Z = null_space(dq.J)
    nu = Z @ rng.normal(size=Z.shape[1])
    nu *= vel / max(np.abs(nu).max(), 1e-12)
    st.vB = nu[:6]
    st.sdot = nu[6:]
    return st


def random_raw_state(model, rng, vel=1.0):
    st = RobotState.home(model, model.home() + rng.uniform(-1.0, 1.0, model.n))
    q = rng.normal(size=4)
    st.base_quat = q / np.linalg.norm(q)
    st.base_pos = rng.normal(size=3)
    y = raw_vector(model, st)
    y[7 + model.n:] = rng.uniform(-vel, vel, 6 + model.n)
    return state_from_raw(model, y)


def random_spd(rng, n, scale=1.0, floor=0.1):
    A = rng.normal(size=(n, n))
    return scale * (A @ A.T / n + floor * np.eye(n))


def momentum_setup(model, rng, n=None):
    n = model.n if n is None else n
    gains = MomentumGains(np.diag([12.0, 12, 12, 6, 6, 6]), np.diag([36.0, 36, 36, 9, 9, 9]),
                          5.0 * np.eye(n), JointGains(25.0 * np.eye(n), 10.0 * np.eye(n)))
    ref = MomentumReference(rng.normal(scale=0.5, size=6), rng.normal(scale=0.5, size=6))
    istate = ControllerState(rng.normal(scale=0.05, size=6))
    return gains, ref, istate


def random_joint_ref(model, state, rng, scale=0.1):
    return JointReference(state.s + rng.normal(scale=scale, size=model.n),
                          rng.normal(scale=scale, size=model.n), rng.normal(scale=scale, size=model.n))


def modified(model, **actuation):
    """Copy of ``model`` with actuation entries replaced (lists or arrays)."""
    doc = model_to_dict(model)
    for k, v in actuation.items():
        doc["actuation"][k] = np.asarray(v, dtype=float).tolist() if not np.isscalar(v) else v
    return model_from_dict(doc)
