import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsbox import (
    JointDistribution,
    deterministic_box,
    isotropic,
    joint_with_inputs,
    mix,
    product_box,
    rho,
    rho_binary_closed_form,
    rho_box,
    rho_squared_variational,
    rho_value,
)
from nsbox.prob import apply_local_channels, product

from conftest import dsbs, joints, random_joint


def svd_oracle(d):
    """Second singular value of the normalized matrix, via a plain SVD."""
    pa, pb = d.p_a, d.p_b
    ia, ib = pa > 1e-12, pb > 1e-12
    m = d.probs[np.ix_(ia, ib)] / np.sqrt(np.outer(pa[ia], pb[ib]))
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[1]) if len(s) > 1 else 0.0


class TestRho:
    def test_dsbs(self):
        for r in (-0.7, 0.0, 0.3, 0.99):
            assert rho_value(dsbs(r)) == pytest.approx(abs(r), abs=1e-12)

    def test_block_diagonal_is_one(self):
        p = np.zeros((3, 3))
        p[0, 0], p[1, 1], p[1, 2], p[2, 1] = 0.4, 0.2, 0.2, 0.2
        assert rho_value(JointDistribution(p)) == pytest.approx(1.0, abs=1e-12)

    def test_product_and_degenerate(self):
        assert rho_value(JointDistribution(np.outer([0.3, 0.7], [0.5, 0.25, 0.25]))) < 1e-7
        r = rho(JointDistribution([[0.5, 0.5]]))
        assert r.rho == 0.0 and r.optimizer_f is None

    def test_optimizers_attain_rho(self, rng):
        for _ in range(30):
            d = random_joint(rng, sparse=True)
            r = rho(d)
            if r.optimizer_f is None:
                continue
            f, g = r.optimizer_f, r.optimizer_g
            assert d.p_a @ f == pytest.approx(0, abs=1e-10)
            assert d.p_b @ g == pytest.approx(0, abs=1e-10)
            assert d.p_a @ f**2 == pytest.approx(1, abs=1e-9)
            assert d.p_b @ g**2 == pytest.approx(1, abs=1e-9)
            assert f @ d.probs @ g == pytest.approx(r.rho, abs=1e-9)

    def test_jacobi_route(self, rng):
        for _ in range(20):
            d = random_joint(rng)
            assert rho(d, method="jacobi").rho == pytest.approx(rho(d).rho, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(joints())
def test_matches_svd_oracle(d):
    assert rho_value(d) == pytest.approx(svd_oracle(d), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(joints(floor=1e-6))
def test_variational_form(d):
    # the generalized eigenproblem is conditioned by 1/min(p), hence the floor
    assert rho_squared_variational(d) == pytest.approx(rho_value(d) ** 2, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(joints(3), st.integers(0, 2**31))
def test_data_processing(d, seed):
    rng = np.random.default_rng(seed)
    ca = rng.dirichlet(np.ones(3), size=d.a_card)
    cb = rng.dirichlet(np.ones(2), size=d.b_card)
    assert rho_value(apply_local_channels(d, ca, cb)) <= rho_value(d) + 1e-9


@settings(max_examples=60, deadline=None)
@given(joints(3), joints(3))
def test_tensorization(p, q):
    assert rho_value(product(p, q)) == pytest.approx(max(rho_value(p), rho_value(q)), abs=1e-9)


def test_symmetry_under_relabel_and_transpose(rng):
    d = random_joint(rng, 3, 4)
    perm = d.probs[[2, 0, 1]][:, [3, 1, 0, 2]]
    assert rho_value(JointDistribution(perm)) == pytest.approx(rho_value(d), abs=1e-12)
    assert rho_value(d.transpose()) == pytest.approx(rho_value(d), abs=1e-12)


class TestClosedForm:
    def test_matches_spectral(self, rng):
        for _ in range(200):
            d = random_joint(rng, 2, 2, sparse=True)
            assert rho_binary_closed_form(d) == pytest.approx(rho_value(d), abs=1e-10)

    def test_nearly_deterministic_bit(self):
        # cancellation in 1 - beta^2 used to leave ~1e-8 here
        d = JointDistribution([[0.998479591, 6.5e-14], [0.001520409 - 6.5e-14, 0.0]])
        assert rho_binary_closed_form(d) == rho_value(d) == 0.0

    def test_deterministic_bits(self):
        assert rho_binary_closed_form(JointDistribution([[1.0, 0.0], [0.0, 0.0]])) == 0.0
        assert rho_binary_closed_form(JointDistribution([[0.5, 0.0], [0.0, 0.5]])) == pytest.approx(1.0)

    def test_shape(self):
        with pytest.raises(ValueError):
            rho_binary_closed_form(JointDistribution(np.full((3, 2), 1 / 6)))


class TestBoxRho:
    @pytest.mark.parametrize("eta", np.linspace(0, 1, 11))
    def test_isotropic(self, eta):
        assert rho_box(isotropic(eta)).rho == pytest.approx(eta, abs=1e-12)

    def test_tie_break_is_lexicographic(self):
        r = rho_box(isotropic(0.8))
        assert r.argmax_input_pair == (0, 0)
        np.testing.assert_allclose(r.per_input, np.full((2, 2), 0.8))

    def test_argmax(self):
        # correlated only at (1, 0)
        p = product_box([[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]).p.copy()
        p[1, 0] = [[0.5, 0.0], [0.0, 0.5]]
        from nsbox import validate
        r = rho_box(validate(p))
        assert r.argmax_input_pair == (1, 0) and r.rho == pytest.approx(1.0)

    def test_joint_with_inputs(self):
        box = isotropic(1.0)
        q = JointDistribution(np.full((2, 2), 0.25))
        d = joint_with_inputs(box, q)
        assert d.shape == (4, 4)
        # symbol a * x_card + x
        assert d.probs[1 * 2 + 1, 0 * 2 + 1] == pytest.approx(0.25 * 0.5)
        assert d.probs[1, 1] == 0.0  # a=0,x=1 with b=0,y=1 needs a xor b = 1
        with pytest.raises(ValueError):
            joint_with_inputs(box, np.ones((3, 2)) / 6)
