import json
import math

import numpy as np
import pytest

from nsbox import TSIRELSON_ETA, chsh_value, isotropic, rho_box, sequential_chain, identity_wiring
from nsbox.boxes import from_binary_params, deterministic_box
from nsbox import harness as h


class TestSeeds:
    def test_stable_and_distinct(self):
        a = h.case_seeds(7, 50)
        assert a == h.case_seeds(7, 50)
        assert len(set(a)) == 50
        assert all(0 <= s < 2**63 for s in a)
        assert h.case_seeds(7, 10) == a[:10]
        assert h.case_seeds(8, 10) != a[:10]


class TestGenerators:
    def test_pr_vertex_is_perfectly_correlated(self, rng):
        for _ in range(10):
            r = rho_box(h.pr_vertex(rng))
            np.testing.assert_allclose(r.per_input, 1.0, atol=1e-12)
        assert h.pr_vertex(rng, 3, 2, 3).shape == (3, 2, 3, 3)

    def test_local_boxes(self, rng):
        for _ in range(20):
            assert chsh_value(h.random_box(rng, pr_weight=False)) <= 0.75 + 1e-12
            assert rho_box(h.random_product_box(rng)).rho < 1e-6

    def test_random_box_shapes(self, rng):
        assert h.random_box(rng, 3, 2, 3).shape == (3, 2, 3, 3)


class TestReport:
    def _report(self):
        rep = h.FuzzReport("demo", {"k": 1}, 1e-9)
        rep.add(0, 11, "x <= y", 0.5, 0.75)
        rep.add(1, 12, "x <= y", 1.0 + 5e-10, 1.0)
        rep.add(2, 13, "x <= y", 2.0, 1.0)
        rep.cases_run = 3
        return rep

    def test_margins(self):
        rep = self._report()
        assert [r.passed for r in rep.rows] == [True, True, False]
        assert rep.worst_margin == -1.0
        assert rep.failures == [(13, "case 2: x <= y", {"lhs": 2.0, "rhs": 1.0, "margin": -1.0})]
        assert not rep.ok

    def test_empty(self):
        rep = h.FuzzReport("e", {}, 1e-9)
        assert rep.ok and math.isinf(rep.worst_margin)
        assert rep.summary()["worst_margin"] is None

    def test_csv_bytes(self):
        assert h.report_csv(self._report()) == (
            "case_id,seed,quantity,lhs,rhs,margin,pass\n"
            "0,11,x <= y,0.5,0.75,0.25,true\n"
            "1,12,x <= y,1.0000000005,1,-5.0000004137e-10,true\n"
            "2,13,x <= y,2,1,-1,false\n"
        )

    def test_json_and_files(self, tmp_path):
        csv_path, json_path = h.write_report(self._report(), tmp_path / "r")
        assert csv_path.name == "r.csv" and json_path.name == "r.json"
        data = json.loads(json_path.read_text())
        assert data["campaign"] == "demo" and data["checks"] == 3
        assert data["failures"][0]["seed"] == 13


class TestCampaigns:
    def test_rho(self):
        rep = h.fuzz_rho_monotonicity(2, 15, seed=1)
        assert rep.ok and rep.cases_run == 15 and len(rep.rows) == 15
        assert h.report_csv(rep) == h.report_csv(h.fuzz_rho_monotonicity(2, 15, seed=1))

    def test_rho_product_boxes(self):
        rep = h.fuzz_rho_monotonicity(2, 10, seed=2, product=True)
        assert rep.ok and rep.worst_margin >= -1e-9

    def test_chain(self):
        assert h.fuzz_chain_rho(3, 10, seed=3).ok

    def test_mc(self):
        rep = h.fuzz_mc_ribbon_monotonicity(2, 8, seed=4)
        assert rep.ok and rep.rows

    def test_hc_inequality(self):
        rep = h.fuzz_hc_wiring_inequality(2, 4, 30, seed=5)
        assert rep.ok and len(rep.rows) == 120

    def test_hc_inequality_detects_violations_outside_triangle(self):
        # (1, 1) is outside the ribbon of PR_1, so the harness should catch it
        rep = h.check_hc_wiring_inequality(identity_wiring(isotropic(1.0)), (1.0, 1.0), 50, seed=0)
        assert not rep.ok

    def test_lemmas(self):
        rep = h.fuzz_structure_lemmas(6, seed=6)
        assert rep.ok and len(rep.rows) == 12

    def test_inputs(self):
        assert h.fuzz_input_bound(100, seed=7).ok

    def test_channel_views(self, rng):
        ia = np.array([0, 0, 1, 1])
        ib = np.array([0, 1, 0, 1])
        for _ in range(20):
            w = h.random_channel(rng, 4, ia, ib)
            np.testing.assert_allclose(w.sum(axis=1), 1.0)


class TestIsotropic:
    def test_scan(self):
        rows = h.isotropic_scan([0.0, 0.5, TSIRELSON_ETA, 1.0], n_max=1000)
        for r in rows:
            assert r.rho == pytest.approx(r.eta, abs=1e-9)
            assert r.chsh == pytest.approx((1 + r.eta) / 2, abs=1e-12)
            assert r.inf_ratio == pytest.approx(r.eta**2, abs=1e-2)
        assert h.strictly_separated(rows)
        assert h.isotropic_csv(rows[:1]) == "eta,rho,chsh,inf_ratio\n0,0,0.5,0\n"

    def test_separation_detects_ties(self):
        rows = [h.IsotropicRow(0.1, 0.5, 0.55, 0.25), h.IsotropicRow(0.2, 0.5, 0.6, 0.25)]
        assert not h.strictly_separated(rows)


class TestFrontier:
    @pytest.mark.parametrize("eta", [TSIRELSON_ETA, 0.9, 1.0])
    def test_sampler_meets_threshold(self, eta, rng):
        for _ in range(50):
            params = h.sample_frontier_params(eta, rng)
            assert not params.violations()
            assert chsh_value(from_binary_params(params)) >= (1 + eta) / 2 - 1e-12

    def test_sampler_spreads_out(self, rng):
        vals = [chsh_value(from_binary_params(h.sample_frontier_params(0.75, rng))) for _ in range(200)]
        assert min(vals) < 0.88 and max(vals) > 0.9

    def test_campaign(self):
        assert h.chsh_rho_frontier(0.8, 100, seed=1).ok
        with pytest.raises(ValueError):
            h.chsh_rho_frontier(0.6, 10)


class TestMixturePivot:
    def test_found(self):
        v = h.common_randomness_argument(0.8, [isotropic(1.0), isotropic(0.0)], [0.8, 0.2])
        assert v.status == "component-found" and v.component == 0
        assert v.mixture_chsh == pytest.approx(0.9) and v.rho_bound_holds

    def test_not_met(self):
        v = h.common_randomness_argument(0.8, [isotropic(1.0), isotropic(0.0)], [0.5, 0.5])
        assert v.status == "hypothesis-not-met" and v.component is None

    def test_zero_weight_component_ignored(self):
        boxes = [isotropic(1.0), isotropic(0.9), deterministic_box([0, 0], [0, 0], 2, 2)]
        v = h.common_randomness_argument(0.8, boxes, [0.0, 1.0, 0.0])
        assert v.component == 1

    def test_non_binary(self):
        from nsbox import product_box
        with pytest.raises(ValueError):
            h.common_randomness_argument(0.8, [product_box([[1 / 3] * 3], [[1.0]])], [1.0])
