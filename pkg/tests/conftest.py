import numpy as np
import pytest
from hypothesis import strategies as st

from nsbox import JointDistribution


def random_joint(rng, a_card=None, b_card=None, sparse=False):
    """Dirichlet table at a random concentration, optionally with holes."""
    a_card = a_card or int(rng.integers(2, 5))
    b_card = b_card or int(rng.integers(2, 5))
    p = rng.dirichlet(np.full(a_card * b_card, 10 ** rng.uniform(-1, 1))).reshape(a_card, b_card)
    if sparse:
        p = p * (rng.uniform(size=p.shape) > 0.3)
        if p.sum() == 0:
            p[0, 0] = 1.0
    return JointDistribution(p / p.sum())


def dsbs(r):
    """Binary symmetric pair with correlation ``r``."""
    return JointDistribution(np.array([[1 + r, 1 - r], [1 - r, 1 + r]]) / 4)


@st.composite
def joints(draw, max_card=4, floor=0.0):
    """Tables with entries in [0, 1]; entries below ``floor`` are zeroed."""
    a = draw(st.integers(1, max_card))
    b = draw(st.integers(1, max_card))
    w = draw(st.lists(st.floats(0.0, 1.0), min_size=a * b, max_size=a * b))
    w = np.array(w).reshape(a, b)
    w[w < floor] = 0.0
    if w.sum() < 1e-6:
        w[0, 0] = 1.0
    w = w / w.sum()
    w[w < floor] = 0.0
    return JointDistribution(w / w.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
