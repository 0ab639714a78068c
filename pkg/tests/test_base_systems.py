import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewswitch.base_systems import (
    ConstantField,
    SuspensionField,
    SuspensionFlow,
    TimeMap,
    make_linear_anosov,
    torus_delta,
)
from skewswitch.errors import NotHyperbolicPattern, NotUnimodular, OrientationReversed

from .conftest import T3_ONE, T3_TWO

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


def test_cat_map_eigendata(cat):
    # golden-ratio eigenvalues of [[2, 1], [1, 1]]
    phi2 = (3 + np.sqrt(5)) / 2
    assert np.allclose(cat.eigenvalues, [1 / phi2, phi2], rtol=0, atol=1e-14)
    assert cat.counts == (1, 0, 1)
    M = cat.matrix.astype(float)
    for lam, v in zip(cat.eigenvalues, cat.eigenvectors.T):
        assert np.allclose(M @ v, lam * v, atol=1e-14)
    assert np.allclose(np.linalg.solve(cat.eigenvectors, M @ cat.eigenvectors), np.diag(cat.eigenvalues),
                       atol=1e-13)


def test_t3_bases():
    one = make_linear_anosov(T3_ONE, 1)
    two = make_linear_anosov(T3_TWO, 2)
    assert one.counts == (1, 1, 1)
    assert two.counts == (2, 0, 1)
    assert np.allclose(two.eigenvalues, [0.30797853, 0.64310413, 5.04891734], atol=1e-7)
    assert np.all(one.eigenvalues[:1] > 0)


@pytest.mark.parametrize("matrix, err", [
    ([[2, 0], [0, 1]], NotUnimodular),
    ([[2.5, 1], [1, 1]], NotUnimodular),
    ([[1, 1], [0, 1]], NotHyperbolicPattern),
    ([[0, -1], [1, 0]], NotHyperbolicPattern),
    ([[-2, 1], [1, -1]], OrientationReversed),
])
def test_bad_matrices(matrix, err):
    with pytest.raises(err):
        make_linear_anosov(matrix, 1)


def test_wrong_stable_count():
    with pytest.raises(NotHyperbolicPattern):
        make_linear_anosov(T3_TWO, 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(unit, min_size=2, max_size=2))
def test_cat_inverse_round_trip(x):
    cat = make_linear_anosov([[2, 1], [1, 1]], 1)
    p = np.array([x])
    assert np.max(np.abs(torus_delta(cat.inverse(cat.apply(p)), p))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(unit, min_size=3, max_size=3), st.floats(-3, 3), st.floats(-3, 3))
def test_suspension_flow_group_law(x, s, t):
    F = SuspensionFlow(make_linear_anosov([[2, 1], [1, 1]], 1))
    p = np.array([x])
    a = F.flow(F.flow(p, s), t)
    b = F.flow(p, s + t)
    assert np.max(np.abs(F.delta(a, b))) < 1e-9


def test_suspension_flow_roof_gluing(cat):
    F = SuspensionFlow(cat)
    p = np.array([[0.3, 0.7, 0.0]])
    q = F.flow(p, 1.0)
    # one full turn applies the fiber map
    assert np.allclose(q[0, :2], cat.apply(p[:, :2])[0], atol=1e-14)
    assert q[0, 2] == 0.0


def test_time_map_adapted_derivative_is_constant(cat, rng):
    F = SuspensionFlow(cat)
    g = TimeMap(F, 2)
    p = g.random_points(rng, 50)
    fp = g.apply(p)
    A = np.linalg.solve(g.frame(fp), g.jacobian(p) @ g.frame(p))
    assert np.allclose(A, g.adapted_jacobian(), atol=1e-12)
    assert np.allclose(g.jacobian(g.inverse(p)) @ g.inverse_jacobian(p), np.eye(3), atol=1e-12)


def test_flow_jacobian_matches_finite_difference(cat, rng):
    F = SuspensionFlow(cat)
    p = rng.random((20, 3)) * [1, 1, 0.8] + [0, 0, 0.1]
    t, e = 0.7, 1e-6
    J = F.flow_jacobian(p, t)
    for j in range(3):
        dp = np.zeros(3)
        dp[j] = e
        fd = (F.delta(F.flow(p - dp, t), F.flow(p + dp, t))) / (2 * e)
        assert np.allclose(fd, J[:, :, j], atol=1e-6)


def test_suspension_field_is_continuous_across_roof(cat):
    F = SuspensionFlow(cat)
    X = SuspensionField(F, 0.05)
    top = np.array([[0.2, 0.4, 1.0 - 1e-12]])
    bottom = F.flow(top, 1e-12)
    pushed = F.flow_jacobian(top, 1e-12)[0] @ X.value(top)[0]
    assert np.allclose(pushed, X.value(bottom)[0], atol=1e-9)
    # constant adapted length
    T = F.frame(top)[0]
    assert np.isclose(np.linalg.norm(np.linalg.solve(T, X.value(top)[0])), 0.05)


def test_constant_field_flow(cat):
    X = ConstantField(cat, cat.eigenvectors[:, 0], 0.05)
    p = np.array([[0.1, 0.2]])
    assert np.allclose(X.sigma(X.sigma(p, 0.3), -0.3), p, atol=1e-15)
    assert np.allclose(X.sigma_jacobian(p, 1.0), np.eye(2))
