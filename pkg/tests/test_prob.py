import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsbox import JointDistribution, TableDistribution, conditional_expectation, variance_decomposition
from nsbox.prob import DistributionError, TableTooLarge, joint_entropies, nats_to_bits

from conftest import joints, random_joint


class TestJointDistribution:
    def test_marginals_and_support(self):
        d = JointDistribution([[0.5, 0.0], [0.25, 0.25]])
        np.testing.assert_allclose(d.p_a, [0.5, 0.5])
        np.testing.assert_allclose(d.p_b, [0.75, 0.25])
        assert d.support.tolist() == [[True, False], [True, True]]

    def test_rejects_bad_tables(self):
        with pytest.raises(DistributionError, match="negative"):
            JointDistribution([[1.1, -0.1]])
        with pytest.raises(DistributionError, match="sums to"):
            JointDistribution([[0.5, 0.4]])
        with pytest.raises(DistributionError):
            JointDistribution([0.5, 0.5])

    def test_immutable(self):
        d = JointDistribution([[0.5, 0.5]])
        with pytest.raises(ValueError):
            d.probs[0, 0] = 1.0

    def test_tiny_negative_is_clipped(self):
        d = JointDistribution([[1.0 + 1e-13, -1e-13]])
        assert d.probs.min() == 0.0


class TestConditionalExpectation:
    def test_hand_values(self):
        d = JointDistribution([[0.25, 0.25], [0.5, 0.0]])
        f = np.array([[1.0, 3.0], [2.0, 99.0]])
        np.testing.assert_allclose(conditional_expectation(d, f, "A"), [2.0, 2.0])
        np.testing.assert_allclose(conditional_expectation(d, f, "B"), [5 / 3, 3.0])

    def test_zero_marginal_is_nan(self):
        d = JointDistribution([[1.0, 0.0], [0.0, 0.0]])
        out = conditional_expectation(d, np.ones((2, 2)), "A")
        assert out[0] == 1.0 and math.isnan(out[1])

    def test_bad_given(self):
        d = JointDistribution([[1.0]])
        with pytest.raises(ValueError):
            conditional_expectation(d, [[0.0]], "C")


@settings(max_examples=60, deadline=None)
@given(joints(), st.integers(0, 2**31))
def test_total_variance_both_sides(d, seed):
    f = np.random.default_rng(seed).normal(size=d.shape)
    v = variance_decomposition(d, f)
    assert v.total == pytest.approx(v.var_of_cond_mean_A + v.mean_of_cond_var_A, abs=1e-12)
    assert v.total == pytest.approx(v.var_of_cond_mean_B + v.mean_of_cond_var_B, abs=1e-12)
    assert min(v.var_of_cond_mean_A, v.mean_of_cond_var_B) >= 0


def test_variance_oracle_by_sampling_free_formula(rng):
    # direct double sum as an independent route
    d = random_joint(rng, 3, 3)
    f = rng.normal(size=(3, 3))
    p = d.probs
    mean = (p * f).sum()
    ca = (p * f).sum(1) / p.sum(1)
    assert variance_decomposition(d, f).var_of_cond_mean_A == pytest.approx(
        (p.sum(1) * (ca - mean) ** 2).sum(), rel=1e-12)


class TestEntropy:
    def test_joint_entropies_uniform(self):
        d = JointDistribution(np.full((2, 4), 1 / 8))
        ha, hb, hab = joint_entropies(d)
        assert (ha, hb, hab) == pytest.approx((math.log(2), math.log(4), math.log(8)))
        assert nats_to_bits(hab) == pytest.approx(3.0)

    def test_zero_cells_ignored(self):
        assert joint_entropies(JointDistribution([[1.0, 0.0]]))[2] == 0.0


def _xor_table():
    p = np.zeros((2, 2, 2))
    for a in range(2):
        for b in range(2):
            p[a, b, a ^ b] = 0.25
    return TableDistribution([("A", 2), ("B", 2), ("C", 2)], p)


class TestTableDistribution:
    def test_xor_information(self):
        t = _xor_table()
        assert t.mutual_information(["A"], ["B"]) == 0.0
        assert t.mutual_information(["A"], ["B"], ["C"]) == pytest.approx(math.log(2))
        # synergy: I(A;B;C) = -log 2 in every ordering
        for order in (("A", "B", "C"), ("B", "C", "A"), ("C", "A", "B")):
            assert t.interaction_information([order[0]], [order[1]], [order[2]]) == pytest.approx(-math.log(2))

    def test_interaction_symmetric_on_random_tables(self, rng):
        for _ in range(20):
            p = rng.dirichlet(np.ones(24)).reshape(2, 3, 2, 2)
            t = TableDistribution([("A", 2), ("B", 3), ("C", 2), ("D", 2)], p)
            vals = [t.interaction_information([x], [y], [z], ["D"])
                    for x, y, z in (("A", "B", "C"), ("B", "C", "A"), ("C", "A", "B"))]
            assert max(vals) - min(vals) < 1e-12

    def test_matches_joint_entropies(self, rng):
        d = random_joint(rng, 3, 4)
        t = TableDistribution([("A", 3), ("B", 4)], d.probs)
        ha, hb, hab = joint_entropies(d)
        assert t.entropy(["A"]) == pytest.approx(ha)
        assert t.entropy(["A", "B"]) == pytest.approx(hab)
        assert t.mutual_information(["A"], ["B"]) == pytest.approx(ha + hb - hab, abs=1e-12)

    def test_derived_variable(self):
        t = _xor_table().with_derived("S", np.add.outer(np.add.outer([0, 1], [0, 1]), [0, 0]))
        # S = A + B carries no information about C beyond A
        assert t.entropy(["S"]) == pytest.approx(1.5 * math.log(2))
        assert t.mutual_information(["S"], ["C"]) == pytest.approx(math.log(2))

    def test_derived_siblings_do_not_share_cache(self):
        t = _xor_table()
        t.entropy(["A"])
        u = t.with_derived("Z", np.zeros((2, 2, 2), dtype=int))
        v = t.with_derived("Z", np.indices((2, 2, 2))[0])
        assert u.entropy(["Z"]) == 0.0
        assert v.entropy(["Z"]) == pytest.approx(math.log(2))

    def test_marginal(self):
        m = _xor_table().marginal(["C"])
        np.testing.assert_allclose(m.probs, [0.5, 0.5])

    def test_errors(self):
        t = _xor_table()
        with pytest.raises(DistributionError):
            t.mutual_information(["A"], ["A"])
        with pytest.raises(KeyError, match="unknown variable"):
            t.entropy(["Q"])
        with pytest.raises(DistributionError, match="duplicate"):
            TableDistribution([("A", 1), ("A", 1)], np.ones((1, 1)))
        with pytest.raises(DistributionError, match="shape"):
            TableDistribution([("A", 2)], np.ones(3) / 3)
        with pytest.raises(TableTooLarge):
            TableDistribution([("A", 10_000_001)], np.zeros(10_000_001))
