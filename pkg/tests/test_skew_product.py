import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewswitch.base_systems import SuspensionFlow, make_linear_anosov
from skewswitch.errors import ConstantsOutOfOrder, SplittingUnavailable
from skewswitch.profiles import build_profile
from skewswitch.skew_product import build_tower, df_apply, iterate_cocycle, orbit

from .conftest import CAT, T3_ONE, T3_TWO

_CAT_TOWER = build_tower(make_linear_anosov(CAT, 1), build_profile(0.25, 0.4, 1.8, 0.9), epsilon=0.05)


def _towers(cat_tower, flow_tower, d2_tower):
    doubled = build_tower(make_linear_anosov(CAT, 1), build_profile(0.25, 0.4, 1.8, 0.9), doubling=True)
    return [cat_tower, flow_tower, d2_tower, doubled]


def test_round_trip_and_chain_rule(cat_tower, flow_tower, d2_tower, rng):
    for tw in _towers(cat_tower, flow_tower, d2_tower):
        p = tw.random_points(rng, 2000)
        assert np.max(np.abs(tw.delta(tw.inverse(tw.apply(p)), p))) < 1e-9
        q = tw.random_points(rng, 2000)
        pre = tw.inverse(q)
        # independently derived D(f^-1) against Df
        M = tw.jacobian(pre) @ tw.inverse_jacobian(q)
        assert np.max(np.abs(M - np.eye(tw.dim))) < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.floats(-1, 1))
def test_round_trip_property(x1, x2, z):
    p = np.array([[x1, x2, z]])
    back = _CAT_TOWER.inverse(_CAT_TOWER.apply(p))
    assert np.max(np.abs(_CAT_TOWER.delta(back, p))) < 1e-9


def test_jacobian_matches_finite_differences(cat_tower, flow_tower, rng):
    e = 1e-7
    for tw in (cat_tower, flow_tower):
        p = tw.random_points(rng, 200)
        p[:, -1] *= 0.98
        if tw.mode == "flow":
            p[:, 2] = 0.1 + 0.8 * p[:, 2]
        J = tw.jacobian(p)
        for j in range(tw.dim):
            dp = np.zeros(tw.dim)
            dp[j] = e
            fd = tw.delta(tw.apply(p - dp), tw.apply(p + dp)) / (2 * e)
            assert np.max(np.abs(fd - J[:, :, j])) < 2e-5


def test_invariant_fibers_and_mirror(cat_tower, rng):
    x = rng.random((100, 2))
    for z in (0.0, 1.0, -1.0):
        p = np.column_stack([x, np.full(100, z)])
        assert np.all(cat_tower.apply(p)[:, -1] == z)
    p = np.column_stack([x, rng.uniform(0, 1, 100)])
    m = p * [1, 1, -1]
    fp, fm = cat_tower.apply(p), cat_tower.apply(m)
    assert np.allclose(fp[:, :2], fm[:, :2]) and np.allclose(fp[:, 2], -fm[:, 2])


def test_doubling_is_periodic(cat):
    tw = build_tower(cat, build_profile(0.25, 0.4, 1.8, 0.9), doubling=True)
    p = np.array([[0.3, 0.6, 0.4], [0.1, 0.2, -0.7]])
    a = tw.apply(p)
    b = tw.apply(p + [0, 0, 2])
    assert np.allclose(b - a, [[0, 0, 2], [0, 0, 2]])


def test_adapted_derivative_on_bottom_fiber(cat_tower, cat, rng):
    # Df is block diagonal on M x {0}: base eigenvalues and lambda
    p = np.column_stack([rng.random((20, 2)), np.zeros(20)])
    A = cat_tower.adapted_jacobian(p)
    expected = np.diag([cat.eigenvalues[0], cat.eigenvalues[1], 0.25])
    assert np.allclose(A, expected, atol=1e-13)


def test_counts_and_dims(cat_tower, flow_tower, d2_tower):
    assert cat_tower.counts == (1, 1, 1) and cat_tower.dim == 3
    assert flow_tower.counts == (1, 2, 1) and flow_tower.dim == 4
    assert d2_tower.counts == (2, 2, 1) and d2_tower.dim == 5


def test_orbit_and_cocycle(cat_tower, rng):
    p = cat_tower.random_points(rng, 3)
    orb = orbit(cat_tower, p, 5)
    assert orb.shape == (6, 3, 3)
    assert np.allclose(orbit(cat_tower, orb[-1], -5)[-1], p, atol=1e-9)
    w = np.array([[0.0, 0.0, 1.0]])
    assert df_apply(cat_tower, p[:1], w).shape == (1, 3)
    tr = iterate_cocycle(cat_tower, p[0], [0, 0, 1], 10)
    assert tr.log_norm.shape == (11,)


@pytest.mark.parametrize("kw, err", [
    (dict(d=2), SplittingUnavailable),
    (dict(mode="flow"), SplittingUnavailable),
])
def test_tower_errors(cat, kw, err):
    with pytest.raises(err):
        build_tower(cat, build_profile(0.25, 0.4, 1.8, 0.9), **kw)


def test_constant_ordering_errors(cat):
    # lambda must be below the base stable rate 0.382
    with pytest.raises(ConstantsOutOfOrder):
        build_tower(cat, build_profile(0.39, 0.5, 1.8, 0.9))
    # flow needs eta^N < lambda
    with pytest.raises(ConstantsOutOfOrder):
        build_tower(SuspensionFlow(cat), build_profile(0.25, 0.4, 1.8, 0.9, N=1), mode="flow")


def test_multiswitch_needs_decreasing_rates():
    base = make_linear_anosov(T3_TWO, 2)
    with pytest.raises(ConstantsOutOfOrder):
        build_tower(base, [build_profile(0.12, 0.7, 1.8, 0.9), build_profile(0.2, 0.7, 1.8, 0.9)], d=2)


def test_t3_one_stable_tower():
    tw = build_tower(make_linear_anosov(T3_ONE, 1), build_profile(0.12, 0.25, 1.8, 0.9))
    assert tw.counts == (1, 2, 1)
