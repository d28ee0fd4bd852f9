import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def dsbs(p):
    return np.array([[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]])


def bsc_matrix(p):
    return np.array([[1 - p, p], [p, 1 - p]])


@st.composite
def simplex_arrays(draw, shape, min_mass=0.0):
    """Random probability arrays of the given shape, optionally with zeros."""
    size = int(np.prod(shape))
    weights = draw(st.lists(st.floats(0.0, 1.0), min_size=size, max_size=size))
    w = np.array(weights) + min_mass
    if w.sum() <= 0:
        w = np.ones(size)
    return (w / w.sum()).reshape(shape)


@st.composite
def joint_pmfs(draw, max_rows=3, max_cols=3, min_mass=0.0):
    r = draw(st.integers(2, max_rows))
    c = draw(st.integers(2, max_cols))
    return draw(simplex_arrays((r, c), min_mass))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
