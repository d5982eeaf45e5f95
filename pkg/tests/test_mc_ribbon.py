import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from nsbox import (
    JointDistribution,
    form_value,
    isotropic,
    mc_boundary_slice,
    mc_inf_ratio,
    mc_inf_ratio_box,
    mc_membership,
    mc_membership_box,
    perturbation_second_order,
    rho_value,
)
from nsbox.mc_ribbon import PerturbationError, RibbonPoint, sequence_ratio_check

from conftest import dsbs, joints, random_joint


def dsbs_det(r, l1, l2):
    """Determinant of the form restricted to span{(-1)^a, (-1)^b}.

    For the symmetric binary pair every other zero-mean direction has a
    positive value, so this 2x2 block decides membership.
    """
    c = r * r
    m11 = 1 - l1 - l2 * c
    m22 = 1 - l1 * c - l2
    m12 = r * (1 - l1 - l2)
    return m11 * m22 - m12 * m12, m11, m22


def dsbs_slice(r, l2):
    g = lambda l1: dsbs_det(r, l1, l2)[0]
    return 1.0 if g(1.0) >= 0 and dsbs_det(r, 1.0, l2)[1] >= 0 else brentq(g, 1 - l2, 1.0, xtol=1e-14)


class TestMembership:
    def test_dsbs_hand_witness(self):
        d = dsbs(0.5)
        f = np.array([[2.0, 0.0], [0.0, -2.0]])  # (-1)^a + (-1)^b
        assert form_value(d, f, (1.0, 0.5)) == pytest.approx(-0.375)
        v = mc_membership(d, (1.0, 0.5))
        assert not v.inside
        assert form_value(d, v.witness_f, (1.0, 0.5)) < 0
        assert d.expectation(v.witness_f) == pytest.approx(0, abs=1e-12)

    def test_pr_conditional_outside(self):
        v = mc_membership_box(isotropic(0.9), (1.0, 0.5))
        assert not v.inside and v.input_pair == (0, 0)

    def test_product_inside_everywhere(self, rng):
        for _ in range(10):
            d = JointDistribution(np.outer(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))))
            assert mc_membership(d, (1.0, 1.0)).inside

    def test_perfectly_correlated(self):
        d = dsbs(1.0)
        assert mc_membership(d, (0.5, 0.5)).inside
        assert not mc_membership(d, (0.5, 0.51)).inside

    def test_jacobi_agrees(self, rng):
        d = random_joint(rng, 3, 3)
        a = mc_membership(d, (0.8, 0.7))
        b = mc_membership(d, (0.8, 0.7), method="jacobi")
        assert a.min_eigenvalue == pytest.approx(b.min_eigenvalue, abs=1e-12)

    def test_point_validation(self):
        with pytest.raises(ValueError):
            RibbonPoint(1.2, 0.0)
        assert tuple(RibbonPoint(0.25, 0.5)) == (0.25, 0.5)


@settings(max_examples=50, deadline=None)
@given(joints(), st.floats(0, 1), st.floats(0, 1))
def test_triangle_inside(d, l1, t):
    assert mc_membership(d, (l1, t * (1 - l1))).inside


@settings(max_examples=40, deadline=None)
@given(joints(3), st.integers(0, 2**31))
def test_min_eigenvalue_bounds_random_functions(d, seed):
    rng = np.random.default_rng(seed)
    pt = tuple(rng.uniform(size=2))
    lam = mc_membership(d, pt).min_eigenvalue
    for _ in range(10):
        f = np.where(d.support, rng.normal(size=d.shape), 0.0)
        f -= d.expectation(f)
        norm = d.expectation(f * f)
        if norm > 1e-12:
            assert form_value(d, f, pt) >= lam * norm - 1e-10


@settings(max_examples=30, deadline=None)
@given(joints(3), st.integers(0, 2**31))
def test_convex_and_downward_closed(d, seed):
    rng = np.random.default_rng(seed)
    p, q = rng.uniform(size=(2, 2))
    if mc_membership(d, p).inside and mc_membership(d, q).inside:
        t = rng.uniform()
        assert mc_membership(d, t * p + (1 - t) * q).inside
    if mc_membership(d, p).inside:
        assert mc_membership(d, p * rng.uniform(size=2)).inside


class TestBoundary:
    @pytest.mark.parametrize("r", [0.2, 0.5, 0.9])
    @pytest.mark.parametrize("l2", [0.05, 0.3, 0.5, 0.9])
    def test_dsbs_slice_matches_determinant(self, r, l2):
        assert mc_boundary_slice(dsbs(r), l2) == pytest.approx(dsbs_slice(r, l2), abs=1e-8)

    def test_dsbs_half_value(self):
        # (0.875 - l1)(0.5 - 0.25 l1) = 0.25 (0.5 - l1)^2 at l1 = 0.8
        assert mc_boundary_slice(dsbs(0.5), 0.5) == pytest.approx(0.8, abs=1e-9)

    def test_box_slice_is_intersection(self):
        box = isotropic(0.5)
        assert mc_boundary_slice(box, 0.5) == pytest.approx(0.8, abs=1e-9)

    def test_independent_slice_is_one(self):
        assert mc_boundary_slice(JointDistribution(np.full((2, 3), 1 / 6)), 0.7) == 1.0

    def test_lambda_range(self):
        with pytest.raises(ValueError):
            mc_boundary_slice(dsbs(0.5), 1.5)


class TestInfRatio:
    def test_random(self, rng):
        for _ in range(10):
            d = random_joint(rng)
            assert mc_inf_ratio(d) == pytest.approx(rho_value(d) ** 2, abs=1e-3)

    def test_isotropic_box(self):
        assert mc_inf_ratio_box(isotropic(0.6)) == pytest.approx(0.36, abs=1e-3)

    def test_sequence_enters_ribbon(self):
        # the slice ratio exceeds rho^2 by O(1/n), so eps = 1e-3 needs n in the hundreds
        rows = sequence_ratio_check(dsbs(0.6), n_max=10_000, eps=1e-3)
        inside = {n: ok for n, ok, _ in rows}
        assert not inside[1] and inside[1000] and inside[10_000]
        assert rows[-1][2] == pytest.approx(0.361)


class TestPerturbation:
    def test_matches_form(self, rng):
        for _ in range(10):
            d = random_joint(rng, 3, 3)
            f = rng.normal(size=(3, 3))
            f -= d.expectation(f)
            f /= np.sqrt(d.expectation(f * f))
            chk = perturbation_second_order(d, f, tuple(rng.uniform(size=2)))
            assert chk.residual < 1e-4

    def test_rejects_unnormalized_f(self):
        with pytest.raises(ValueError, match="zero-mean"):
            perturbation_second_order(dsbs(0.5), np.ones((2, 2)), (0.5, 0.5))

    def test_eps_too_large(self):
        f = np.array([[1.0, 1.0], [-1.0, -1.0]])
        with pytest.raises(PerturbationError) as e:
            perturbation_second_order(dsbs(0.5), f, (0.5, 0.5), eps=2.0)
        assert e.value.max_eps == pytest.approx(1.0)
