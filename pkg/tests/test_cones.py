import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewswitch import cones as K
from skewswitch.base_systems import ConstantField, SuspensionField, SuspensionFlow, TimeMap, make_linear_anosov
from skewswitch.errors import ApertureTooWide, CannotRescale

from .conftest import T3_TWO


@pytest.fixture(scope="module")
def cat_family(cat):
    fam = K.build_standard_cones(cat, 0.5)
    K.find_C_power(fam)
    return fam


def test_standard_cone_inclusions(cat, cat_family):
    X = ConstantField(cat, cat.eigenvectors[:, 0], 0.05)
    margins = K.required_inclusions(cat_family, cat, X)
    assert min(margins.values()) > 1e-3
    assert min(K.structural_margins(cat_family, cat, X).values()) > 0
    assert cat_family.n_power == 1


def test_rescaling_on_flow(cat):
    F = SuspensionFlow(cat)
    g = TimeMap(F, 2)
    fam = K.build_standard_cones(g, 0.5)
    K.find_C_power(fam)
    eps, margins = K.rescale_X_epsilon(g, fam, SuspensionField(F, 0.05), 0.05, 1e-3, flow=F)
    assert eps == pytest.approx(0.003125)
    assert min(margins.values()) >= 1e-3


def test_rescaling_failure(cat, cat_family):
    X = ConstantField(cat, cat.eigenvectors[:, 0], 0.05)
    with pytest.raises(CannotRescale):
        K.rescale_X_epsilon(cat, cat_family, X, 0.05, floor=0.999, kmax=2)


class _Shear:
    """Non-hyperbolic stand-in base: the identity on the 2-torus."""

    dim = 2
    counts = (1, 0, 1)

    def apply(self, p):
        return np.atleast_2d(p)

    def jacobian(self, p):
        return np.broadcast_to(np.eye(2), (np.atleast_2d(p).shape[0], 2, 2))

    def frame(self, p):
        return self.jacobian(p)


def test_aperture_too_wide():
    with pytest.raises(ApertureTooWide):
        K.build_standard_cones(_Shear(), 0.5)


def test_aperture_must_be_positive(cat):
    with pytest.raises(ValueError):
        K.build_standard_cones(cat, 0.0)


def test_strong_stable_family():
    base = make_linear_anosov(T3_TWO, 2)
    X = ConstantField(base, base.eigenvectors[:, 1], 0.05)
    fam = K.build_cones_given_X(base, X)
    n, _, margin = K.find_C_power(fam)
    assert n >= 1 and margin > 1e-3
    # the zero intersection holds with the rate-based weight, not with weight 2
    assert K.weighted_zero_intersection(fam) < 0
    assert K.weighted_zero_intersection_raw(fam, 2.0) > 0
    assert min(K.required_inclusions(fam, base, X).values()) > 1e-3


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.floats(0.01, 100))
def test_scores_are_scale_free(v, scale):
    v = np.array(v)
    if np.linalg.norm(v) < 1e-6:
        return
    cone = K.ConeField((np.diag([1.0, -0.25]),), None, "U")
    a = cone.normalized(v)[0]
    b = cone.normalized(scale * v)[0]
    assert -1 - 1e-12 <= a <= 1 + 1e-12
    assert abs(a - b) < 1e-12


def test_core_and_dual(cat_family):
    U = cat_family["U"]
    assert U.normalized(np.array([0.0, 1.0]))[0] == pytest.approx(1.0)
    assert U.normalized(np.array([1.0, 0.0]))[0] == pytest.approx(-1.0)
    assert U.dual().normalized(np.array([1.0, 0.0]))[0] == pytest.approx(1.0)
