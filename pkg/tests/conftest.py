import numpy as np
import pytest
from hypothesis import strategies as st

from secmargin.pmf import Pmf


def random_pmf(rng, k, offset=0, zeros=False):
    w = rng.dirichlet(np.ones(k))
    if zeros and k > 2:
        w[rng.random(k) < 0.25] = 0.0
        if w.sum() == 0:
            w[0] = 1.0
        w = w / w.sum()
    return Pmf(offset, w)


@st.composite
def pmfs(draw, min_size=1, max_size=8, size=None, offset=0):
    k = size if size is not None else draw(st.integers(min_size, max_size))
    w = draw(st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k))
    w = np.asarray(w)
    if w.sum() < 1e-6:
        w = np.ones(k)
    return Pmf(offset, w / w.sum())


@st.composite
def pmf_pairs(draw, min_size=1, max_size=8):
    k = draw(st.integers(min_size, max_size))
    return draw(pmfs(size=k)), draw(pmfs(size=k))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
