import numpy as np
import pytest

from skewswitch.base_systems import SuspensionFlow, make_linear_anosov
from skewswitch.profiles import build_profile
from skewswitch.skew_product import build_tower

CAT = [[2, 1], [1, 1]]
T3_ONE = [[0, 0, 1], [1, 0, -6], [0, 1, 5]]
T3_TWO = [[0, 0, 1], [1, 0, -5], [0, 1, 6]]

# criterion lines printed at the end of the acceptance run
CRITERIA = {}


@pytest.fixture(scope="session")
def cat():
    return make_linear_anosov(CAT, 1)


@pytest.fixture(scope="session")
def profile():
    return build_profile(0.25, 0.4, 1.8, 0.9)


@pytest.fixture(scope="session")
def cat_tower(cat, profile):
    return build_tower(cat, profile, epsilon=0.05)


@pytest.fixture(scope="session")
def flow_tower(cat):
    return build_tower(SuspensionFlow(cat), build_profile(0.25, 0.4, 1.8, 0.9, N=2), mode="flow",
                       epsilon=0.003125)


@pytest.fixture(scope="session")
def d2_tower():
    base = make_linear_anosov(T3_TWO, 2)
    profs = [build_profile(0.2, 0.7, 1.8, 0.9), build_profile(0.12, 0.7, 1.8, 0.9)]
    return build_tower(base, profs, d=2, epsilon=0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
