import numpy as np
import pytest

from skewswitch import incoherence as I
from skewswitch.errors import SplittingUnavailable


def test_line_field_is_in_cu_and_stable_plane(cat_tower, rng):
    p = I.random_low_points(cat_tower, 30, rng)
    lf = I.line_field(cat_tower, p)
    # horizontal part lies along the weak stable coordinate, oriented into E^-
    assert np.all(lf.u[:, 0] < 0)
    assert np.allclose(np.abs(lf.u[:, 0]), 1.0)
    assert np.all(lf.transversality > 0)
    assert np.allclose(np.linalg.norm(lf.direction, axis=1), 1.0)


def test_sign_dichotomy_small(cat_tower, rng):
    pts = I.random_low_points(cat_tower, 100, rng)
    res = I.sign_dichotomy(cat_tower, pts)
    assert res["exceptions"] == 0
    assert res["min_abs_v"] > 0


def test_falling_curves_fall_to_floor(cat_tower):
    starts = I.start_grid(cat_tower, 4, 2)
    curves = I.integrate_falling(cat_tower, starts, max_len=1.0)
    c = cat_tower.top.profile.c
    for cv in curves:
        assert cv.monotone()
        assert cv.status == "floor"
        assert abs(cv.terminal_z) < 1e-8 * c
        assert cv.length > 0


def test_negative_heights_rise(cat_tower):
    starts = I.start_grid(cat_tower, 2, 1) * [1, 1, -1]
    curves = I.integrate_falling(cat_tower, starts, max_len=1.0)
    assert all(cv.monotone() and cv.z[-1] > cv.z[0] for cv in curves)


def test_length_stop(cat_tower):
    starts = I.start_grid(cat_tower, 2, 1)
    curves = I.integrate_falling(cat_tower, starts, length=0.004)
    assert all(abs(cv.length - 0.004) < 1e-12 for cv in curves)


def test_delta_and_length_constant(cat_tower):
    starts = I.start_grid(cat_tower, 4, 2)
    delta, drops, _ = I.measure_delta(cat_tower, starts)
    assert delta > 0 and np.all(drops >= delta)
    L = I.length_constant(cat_tower, delta)
    prof = cat_tower.top.profile
    assert delta * L > prof.c - prof.h(prof.c)


def test_pushforward_consistency(cat_tower):
    curve = I.integrate_falling(cat_tower, I.start_grid(cat_tower, 1, 1), max_len=1.0)[0]
    assert I.pushforward_consistency(cat_tower, curve) < 1e-3


def test_falln_level_one(cat_tower):
    res = I.verify_falln(cat_tower, 1, 4, n_x=2, n_z=2)
    assert res["passed"]


def test_foliation_box(cat_tower):
    rows, summary = I.foliation_box_demo(cat_tower, n_tracks=4)
    assert summary["crossings"] == 0 and summary["passed"]
    assert len(rows) > 4


def test_multiswitch_is_rejected(d2_tower):
    with pytest.raises(SplittingUnavailable):
        I.line_field(d2_tower, np.zeros((1, 5)))
