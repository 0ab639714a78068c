import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from skewswitch import splitting as S
from skewswitch.errors import DegenerateSeed, NotConverged


def _mp_log_singular_values(mats):
    """Oracle: SVD of the exact product at 60 digits."""
    mp.mp.dps = 60
    P = mp.eye(mats[0].shape[0])
    for M in mats:
        P = mp.matrix(M.tolist()) * P
    sv = mp.svd_r(P, compute_uv=False)
    return sorted(float(mp.log(v)) for v in sv)


def test_log_sv_product_against_mpmath_oracle():
    rng = np.random.default_rng(3)
    # products whose singular values span ~1e-60 .. 1e+60
    mats = [np.diag([0.2, 1.1, 5.0]) @ np.linalg.qr(rng.standard_normal((3, 3)))[0] for _ in range(40)]
    ours = S.log_sv_product([M[None] for M in mats])[0]
    ref = _mp_log_singular_values(mats)
    assert np.allclose(ours, ref, atol=1e-9)


def test_direct_svd_would_lose_small_values():
    # why the exterior-power accumulation exists: A^60 has singular values phi^(+-120)
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    ours = S.log_sv_product([A[None]] * 60)[0]
    phi2 = (3 + np.sqrt(5)) / 2
    assert np.allclose(ours, [-60 * np.log(phi2), 60 * np.log(phi2)], atol=1e-9)
    direct = np.log(np.linalg.svd(np.linalg.matrix_power(A, 60), compute_uv=False))
    assert abs(direct.min() - ours[0]) > 1.0


def test_compound_singular_values():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((4, 4))
    s = np.linalg.svd(M, compute_uv=False)
    C2 = S.compound(M, 2)
    s2 = np.linalg.svd(C2, compute_uv=False)
    pairs = sorted((s[i] * s[j] for i in range(4) for j in range(i + 1, 4)), reverse=True)
    assert np.allclose(s2, pairs)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (5, 2), elements=st.floats(-1, 1)), arrays(np.float64, (2, 2), elements=st.floats(-1, 1)))
def test_subspace_distance_properties(A, R):
    if np.linalg.matrix_rank(A, tol=1e-3) < 2 or abs(np.linalg.det(R)) < 1e-3:
        return
    Q = S.orthonormalize(A)
    Q2 = S.orthonormalize(A @ R)  # same span
    assert S.subspace_distance(Q, Q2) < 1e-8
    B = S.orthonormalize(np.random.default_rng(1).standard_normal((5, 2)))
    d1, d2 = S.subspace_distance(Q, B), S.subspace_distance(B, Q)
    assert abs(d1 - d2) < 1e-10 and 0 <= d1 <= 1 + 1e-12


def test_intersection_of_planes():
    A = np.eye(3)[:, :2]
    B = np.eye(3)[:, 1:]
    I = S.intersect(A, B, 1)
    assert S.subspace_distance(I, np.eye(3)[:, 1:2]) < 1e-14


def test_degenerate_seed(cat_tower):
    frame = np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DegenerateSeed):
        S.estimate_bundle(cat_tower, [[0.1, 0.2, 0.3]], 2, "forward", 10, frame=frame)


def test_not_converged(cat_tower):
    with pytest.raises(NotConverged):
        S.estimate_bundle(cat_tower, [[0.1, 0.2, 0.9]], 1, "forward", 1, tol=1e-14)


def test_splitting_on_bottom_fiber_is_exact(cat_tower, rng):
    p = np.column_stack([rng.random((20, 2)), np.zeros(20)])
    est = S.estimate_splitting(cat_tower, p, 60)
    e = np.eye(3)
    assert np.max(S.subspace_distance(np.broadcast_to(e[:, 2:3], est.s.shape), est.s)) < 1e-10
    assert np.max(S.subspace_distance(np.broadcast_to(e[:, 0:1], est.c.shape), est.c)) < 1e-10
    assert np.max(S.subspace_distance(np.broadcast_to(e[:, 1:2], est.u.shape), est.u)) < 1e-10


def test_equivariance(cat_tower, rng):
    p = cat_tower.random_points(rng, 50)
    eq, angles = S.equivariance_defect(cat_tower, p, 60)
    assert max(v.max() for v in eq.values()) < 1e-6
    assert min(v.min() for v in angles.values()) > 0


def test_lyapunov_bottom_fiber(cat_tower):
    # vertical exponent log(lambda), horizontal ones from the cat map
    rep = S.lyapunov_qr(cat_tower, [0.3, 0.7, 0.0], 3000)
    target = np.sort(np.log([0.25, (3 - np.sqrt(5)) / 2, (3 + np.sqrt(5)) / 2]))
    assert np.allclose(rep.exponents, target, atol=2e-3)
    assert rep.sum_defect < 1e-9
    assert rep.running.shape[1] == 3


def test_domination_margins(cat_tower, rng):
    # n = 1 on M x {0}: gap between lambda and the base stable rate
    p = np.column_stack([rng.random((5, 2)), np.zeros(5)])
    g = S.domination_margins(cat_tower, p, 1)
    assert np.allclose(g[:, 0], np.log(0.3819660112501051 / 0.25))
    assert S.domination_margins(cat_tower, p, 4, split_dims=(3,)).shape == (5, 0)
    with pytest.raises(ValueError):
        S.domination_margins(cat_tower, p, 4, split_dims=(1, 1))
    q = cat_tower.random_points(rng, 100)
    assert np.all(S.domination_margins(cat_tower, q, 32) > 0)


def test_nested_splitting(d2_tower, rng):
    p = d2_tower.random_points(rng, 60)
    res = S.nested_splitting_check(d2_tower, p, 32)
    assert res["passed"]
    assert [lv["stable_dim"] for lv in res["levels"]] == [2, 1]
    assert res["min_stable_internal_gap"] > 0


def test_absolute_check_skips_diffeo(cat_tower):
    assert S.absolute_ph_check(cat_tower, np.zeros((1, 3)), 0.3, 2.0)["skipped"]


def test_absolute_sandwich_small_grid(flow_tower):
    g = np.arange(3) / 3
    grid = np.stack(np.meshgrid(g, g, g, -1 + 2 * g, indexing="ij"), -1).reshape(-1, 4)
    lam = np.sqrt(0.25 * flow_tower.root.mu_s)
    mu = np.sqrt(1.8 * flow_tower.root.mu_u)
    res = S.absolute_ph_check(flow_tower, grid, lam, mu, k=64)
    assert res["passed"] and res["worst_margin"] > 0.05
    literal = S.absolute_ph_check(flow_tower, grid, 0.25, 1.8, k=1)
    assert not literal["passed"]
