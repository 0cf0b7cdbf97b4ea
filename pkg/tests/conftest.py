import pytest

from advecteig.limiting import solve_limit
from advecteig.corrections import solve_corrections
from advecteig.model import canonical_homogeneous, canonical_smooth
from advecteig.verify import gaussian_scenario


@pytest.fixture(scope="session")
def gaussian():
    return gaussian_scenario()


@pytest.fixture(scope="session")
def smooth():
    return canonical_smooth()


@pytest.fixture(scope="session")
def smooth_limit(smooth):
    return solve_limit(smooth, node_count=1023)


@pytest.fixture(scope="session")
def smooth_corrections(smooth_limit):
    return solve_corrections(smooth_limit)


@pytest.fixture(scope="session")
def homog2_limit():
    return solve_limit(canonical_homogeneous(q_hat=2.0), node_count=1023)
