import json
import subprocess
import sys

import numpy as np
import pytest

from nsbox import isotropic, save_box, save_wiring, sequential_chain
from nsbox.cli import main


def run(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "nsbox", *map(str, args)], capture_output=True,
                          text=True, cwd=cwd)


@pytest.fixture
def pr08(tmp_path):
    path = tmp_path / "pr08.json"
    save_box(isotropic(0.8), path)
    return path


class TestExitCodes:
    def test_validate_ok(self, pr08):
        r = run("validate", pr08)
        assert r.returncode == 0
        assert r.stdout == "valid: x_card=2 y_card=2 a_card=2 b_card=2\n"

    def test_signaling_file(self, tmp_path):
        p = isotropic(0.5).p.copy()
        p[1, 1, 0, 0] += 1e-3
        p[1, 1, 1, 0] -= 1e-3
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"x_card": 2, "y_card": 2, "a_card": 2, "b_card": 2, "p": p.tolist()}))
        r = run("validate", path)
        assert r.returncode == 2
        assert "Signaling: marginal of A depends on y; inputs (1, 1)" in r.stderr
        assert run("validate", path, "--tolerance", "1e-2").returncode == 0

    def test_parse_errors(self, tmp_path):
        bad = tmp_path / "x.json"
        bad.write_text("{not json")
        assert run("validate", bad).returncode == 1
        assert run("validate", tmp_path / "missing.json").returncode == 1
        assert run("nonsense").returncode == 1
        assert run("ribbon", "f.json", "--grid", "abc").returncode == 1

    def test_in_process(self, pr08, capsys):
        assert main(["measures", str(pr08)]) == 0
        assert capsys.readouterr().out == "rho,argmax_x,argmax_y,chsh\n0.8,0,0,0.9\n"


class TestMeasures:
    def test_json(self, pr08):
        r = run("measures", pr08, "--format", "json")
        assert json.loads(r.stdout) == {"rho": 0.8, "argmax_input": [0, 0], "chsh": 0.9}

    def test_out_file(self, pr08, tmp_path):
        out = tmp_path / "m.csv"
        assert run("measures", pr08, "--out", out).returncode == 0
        assert out.read_text() == "rho,argmax_x,argmax_y,chsh\n0.8,0,0,0.9\n"


class TestRibbon:
    def test_mc_grid(self, pr08):
        r = run("ribbon", pr08, "--grid", "3")
        lines = r.stdout.splitlines()
        assert lines[0] == "lambda1,lambda2,inside,margin"
        assert len(lines) == 10
        assert lines[1].startswith("0,0,true,")
        row = dict(zip(lines[0].split(","), lines[-1].split(",")))
        assert (row["lambda1"], row["lambda2"], row["inside"]) == ("1", "1", "false")

    def test_hc_grid(self, tmp_path):
        path = tmp_path / "pr1.json"
        save_box(isotropic(1.0), path)
        r = run("ribbon", path, "--which", "hc", "--grid", "3", "--restarts", "8")
        lines = r.stdout.splitlines()
        assert lines[0] == "lambda1,lambda2,inside,margin,certified"
        cells = {tuple(l.split(",")[:2]): l.split(",")[2:] for l in lines[1:]}
        assert cells[("0.5", "0.5")][0] == "true" and cells[("0.5", "0.5")][2] == "heuristic"
        assert cells[("1", "1")][0] == "false" and cells[("1", "1")][2] == "exact"
        assert float(cells[("1", "1")][1]) < 0

    def test_bad_grid(self, pr08):
        assert run("ribbon", pr08, "--grid", "1").returncode == 1


class TestWire:
    def test_chain(self, tmp_path):
        spec = tmp_path / "chain.json"
        save_wiring(sequential_chain([isotropic(1.0)] * 2), spec)
        out, rep = tmp_path / "d.json", tmp_path / "r.csv"
        r = run("wire", spec, "--out", out, "--report", rep)
        assert r.returncode == 0
        d = json.loads(out.read_text())
        np.testing.assert_allclose(d["p"][1][1], [[0.5, 0.0], [0.0, 0.5]])
        lines = rep.read_text().splitlines()
        assert lines[0] == "x_prime,y_prime,structure_residual,chain_rule_residual"
        assert len(lines) == 5
        assert all(float(v) <= 1e-9 for l in lines[1:] for v in l.split(",")[2:])

    def test_bad_spec(self, tmp_path):
        spec = tmp_path / "w.json"
        spec.write_text(json.dumps({"boxes": []}))
        r = run("wire", spec)
        assert r.returncode == 1 and "WiringError" in r.stderr


class TestCampaigns:
    @pytest.mark.parametrize("campaign,extra", [
        ("rho", ["--boxes", "2"]),
        ("mc", ["--boxes", "2"]),
        ("hc-ineq", ["--boxes", "2", "--channels", "10"]),
        ("lemmas", []),
        ("chain", ["--boxes", "3"]),
        ("inputs", []),
    ])
    def test_fuzz_byte_identical(self, campaign, extra, tmp_path):
        a = run("fuzz", campaign, "--cases", "4", "--seed", "3", "--out", tmp_path / "a", *extra)
        b = run("fuzz", campaign, "--cases", "4", "--seed", "3", "--out", tmp_path / "b", *extra)
        assert a.returncode == b.returncode == 0, a.stderr
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert (tmp_path / "a.csv").read_text().startswith("case_id,seed,quantity,lhs,rhs,margin,pass\n")

    def test_fuzz_box_range(self):
        assert run("fuzz", "rho", "--boxes", "5", "--cases", "1").returncode == 1
        assert run("fuzz", "hc-ineq", "--boxes", "4", "--cases", "1").returncode == 1

    def test_scan_isotropic(self):
        r = run("scan-isotropic", "--grid", "0,0.5,1", "--n-max", "100")
        lines = r.stdout.splitlines()
        assert lines[0] == "eta,rho,chsh,inf_ratio"
        assert lines[2].startswith("0.5,0.5,0.75,")
        assert run("scan-isotropic", "--grid", "1.5").returncode == 1

    def test_frontier(self, tmp_path):
        r = run("frontier", "--eta", "0.75", "--n", "20", "--out", tmp_path / "f")
        assert r.returncode == 0
        assert json.loads((tmp_path / "f.json").read_text())["failures"] == []
        assert run("frontier", "--eta", "0.5").returncode == 1
