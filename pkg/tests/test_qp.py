import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from oracles import cone_rows_by_hand
from frictorq.control_floating import nullspace_projector
from frictorq.model import ContactSpec
from frictorq.qp import (QPInfeasibleError, QuadraticCost, constraint_names,
                         friction_cone_constraints, solve_redundancy_qp, violated_constraints)

MG = 9.81 * 30.0


def _foot(mu=0.6, lx=0.1, ly=0.05, mz=0.02, f_min=5.0, name="foot"):
    return ContactSpec(name, np.zeros(3), np.zeros(3), np.array([lx, ly]), mu, f_min, mz)


def test_pure_normal_force_has_margin():
    A, b = friction_cone_constraints([_foot()], [np.eye(3)])
    f = np.array([0, 0, MG, 0, 0, 0.0])
    assert np.all(A @ f - b < -1e-3)


def test_sliding_force_names_facet():
    cones = [_foot(mu=0.5)]
    A, b = friction_cone_constraints(cones, [np.eye(3)])
    f = np.array([0.6 * 100.0, 0, 100.0, 0, 0, 0])
    viol = violated_constraints(A, b, f, cones)
    assert [v[0] for v in viol] == ["foot: friction +x"]
    assert viol[0][1] == pytest.approx(60.0 - 0.5 / np.sqrt(2) * 100.0)
    f[0] = -f[0]
    assert violated_constraints(A, b, f, cones)[0][0] == "foot: friction -x"


def test_low_normal_force_named():
    cones = [_foot(f_min=5.0)]
    A, b = friction_cone_constraints(cones, [np.eye(3)])
    assert violated_constraints(A, b, np.array([0, 0, 1.0, 0, 0, 0]), cones)[0][0] == \
        "foot: normal force >= f_min"


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_cone_rows_match_hand_assembly(seed):
    gen = np.random.default_rng(seed)
    specs = [_foot(*gen.uniform([0.2, 0.02, 0.02, 0.005, 0.0], [1.0, 0.2, 0.1, 0.05, 20.0]), name=f"c{k}")
             for k in range(2)]
    Rs = [Rotation.from_rotvec(gen.normal(scale=0.5, size=3)).as_matrix() for _ in specs]
    A, b = friction_cone_constraints(specs, Rs)
    w = gen.normal(scale=50.0, size=12)
    got = A @ w - b
    for k, (spec, R) in enumerate(zip(specs, Rs)):
        local = np.concatenate([R.T @ w[6 * k:6 * k + 3], R.T @ w[6 * k + 3:6 * k + 6]])
        expect = cone_rows_by_hand(spec.mu, *spec.half_extents, spec.torsional_mu, spec.f_min, local)
        assert np.allclose(got[11 * k:11 * (k + 1)], expect, rtol=1e-12, atol=1e-10)


def test_shrink_tightens_every_bound():
    A0, b0 = friction_cone_constraints([_foot()], [np.eye(3)])
    A1, b1 = friction_cone_constraints([_foot()], [np.eye(3)], shrink=0.1)
    f = np.array([20.0, -10.0, 100.0, 1.0, -2.0, 0.5])
    expect = cone_rows_by_hand(0.54, 0.09, 0.045, 0.018, 5.0, f)
    assert np.allclose(A1 @ f - b1, expect, rtol=1e-12, atol=1e-12)
    assert np.all(A1 @ f - b1 >= A0 @ f - b0 - 1e-12)
    with pytest.raises(ValueError):
        friction_cone_constraints([_foot()], [np.eye(3)], shrink=1.0)


def test_constraint_names_count():
    names = constraint_names([_foot(name="l"), _foot(name="r")])
    assert len(names) == 22 and names[0] == "l: normal force >= f_min" and names[-1] == "r: torsion -z"


def test_toy_clamped_optimum():
    cost = QuadraticCost(np.array([[1.0]]), np.array([-3.0]))
    x = solve_redundancy_qp(cost, np.array([[1.0]]), np.array([1.0]), np.eye(1), np.zeros(1))
    assert x[0] == pytest.approx(1.0, abs=1e-9)


def test_inactive_constraints_give_least_squares(rng):
    # two-contact wrench space with a rank-6 "momentum" map, generous cones
    Jb_T = rng.normal(size=(6, 12))
    N = nullspace_projector(Jb_T)
    L, c = rng.normal(size=(8, 12)), rng.normal(size=8)
    f_base = np.linalg.pinv(Jb_T) @ rng.normal(size=6)
    A, b = rng.normal(size=(22, 12)), np.full(22, 1e6)
    f0 = solve_redundancy_qp(QuadraticCost(L, c), A, b, N, f_base)
    Z = np.linalg.svd(N)[0][:, :6]
    y = np.linalg.lstsq(L @ Z, -(L @ f_base + c), rcond=None)[0]
    assert np.allclose(f0, Z @ y, rtol=1e-7, atol=1e-8)
    assert np.abs(Jb_T @ f0).max() < 1e-10


def test_empty_feasible_set_raises(rng):
    Jb_T = rng.normal(size=(2, 4))
    N = nullspace_projector(Jb_T)
    A = np.vstack([np.eye(4), -np.eye(4)])
    b = np.concatenate([-np.ones(4), -np.ones(4)])  # x <= -1 and x >= 1
    names = [f"row{i}" for i in range(8)]
    with pytest.raises(QPInfeasibleError) as err:
        solve_redundancy_qp(QuadraticCost(np.eye(4), np.zeros(4)), A, b, N, np.zeros(4), names)
    assert err.value.constraint in names and err.value.violation > 0


def test_no_redundancy_checks_base_point():
    A, b = np.array([[1.0]]), np.array([0.0])
    cost = QuadraticCost(np.eye(1), np.zeros(1))
    assert solve_redundancy_qp(cost, A, b, np.zeros((1, 1)), np.array([-1.0]))[0] == 0.0
    with pytest.raises(QPInfeasibleError):
        solve_redundancy_qp(cost, A, b, np.zeros((1, 1)), np.array([1.0]))


def test_deterministic(rng):
    Jb_T = rng.normal(size=(6, 12))
    N = nullspace_projector(Jb_T)
    cost = QuadraticCost(rng.normal(size=(8, 12)), rng.normal(size=8))
    A, b = rng.normal(size=(22, 12)), np.abs(rng.normal(size=22))
    a = solve_redundancy_qp(cost, A, b, N, np.zeros(12))
    assert np.array_equal(a, solve_redundancy_qp(cost, A, b, N, np.zeros(12)))
    assert np.all(A @ a - b <= 1e-9)
