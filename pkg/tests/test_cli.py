import hashlib
import json
import os

import pytest

from kamtori import cli

CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs", "corollary1.json")
RESONANT = os.path.join(os.path.dirname(__file__), "..", "configs", "corollary1_resonant.json")
ZERO = os.path.join(os.path.dirname(__file__), "..", "configs", "zero.json")


def _digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


class TestRun:
    def test_converged_outputs(self, tmp_path):
        out = str(tmp_path / "run")
        assert cli.main(["run", "--config", CONFIG, "--out", out]) == 0
        with open(os.path.join(out, "diagnostics.csv")) as fh:
            header = fh.readline().strip()
        assert header == "nu,K,r,s,norm_u0,norm_u1,norm_w,residual,omega_drift,lambda_drift,status"
        with open(os.path.join(out, "torus.json")) as fh:
            torus = json.load(fh)
        assert torus["residual"] <= 1e-8
        assert len(torus["omega_star"]) == 2

    def test_resonant_exit_code(self, tmp_path, capsys):
        out = str(tmp_path / "res")
        code = cli.main(["run", "--config", RESONANT, "--out", out])
        err = capsys.readouterr().err
        assert code == 2
        assert "resonant halt" in err and "k=" in err and "m=" in err

    def test_zero_perturbation(self, tmp_path):
        out = str(tmp_path / "zero")
        assert cli.main(["run", "--config", ZERO, "--out", out]) == 0
        with open(os.path.join(out, "torus.json")) as fh:
            torus = json.load(fh)
        assert torus["V0"]["entries"] == []

    def test_bad_config_exit_one(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "nope.json"),
                         "--out", str(tmp_path)]) == 1

    def test_xi_override(self, tmp_path, capsys):
        out = str(tmp_path / "ovr")
        code = cli.main(["run", "--config", CONFIG, "--xi", "1.0,1.0", "--out", out])
        assert code == 2  # overridden to the resonant point
        capsys.readouterr()


class TestSweep:
    def test_empty_gamma_rejected(self, tmp_path, capsys):
        assert cli.main(["sweep", "--config", CONFIG, "--out", str(tmp_path)]) == 1
        capsys.readouterr()

    def test_deterministic_outputs(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = str(tmp_path / tag)
            assert cli.main(["sweep", "--config", CONFIG, "--gamma", "3e-3",
                             "--samples", "500", "--seed", "42", "--depth", "1",
                             "--out", out]) == 0
            outs.append(out)
        for name in ("sweep_gamma_0.003.csv", "summary_gamma_0.003.json"):
            assert _digest(os.path.join(outs[0], name)) == \
                _digest(os.path.join(outs[1], name))

    def test_summary_fields(self, tmp_path):
        out = str(tmp_path / "s")
        assert cli.main(["sweep", "--config", CONFIG, "--gamma", "1e-3",
                         "--gamma", "1e-2", "--samples", "500", "--seed", "7",
                         "--depth", "1", "--out", out]) == 0
        with open(os.path.join(out, "summary_gamma_0.01.json")) as fh:
            s = json.load(fh)
        assert set(s) == {"gamma", "fraction", "ci95", "slope_fit"}


class TestBounds:
    def test_a2_suite_passes(self, tmp_path):
        assert cli.main(["bounds", "--suite", "A2", "--out", str(tmp_path)]) == 0

    def test_a5_small(self, tmp_path):
        assert cli.main(["bounds", "--suite", "A5", "--seed", "3", "--cases", "25",
                         "--out", str(tmp_path)]) == 0

    def test_a7_small_and_csv_columns(self, tmp_path):
        out = str(tmp_path)
        assert cli.main(["bounds", "--suite", "A7", "--seed", "3", "--cases", "10",
                         "--out", out]) == 0
        with open(os.path.join(out, "bounds_a7.csv")) as fh:
            header = fh.readline().strip()
            first = fh.readline().strip().split(",")
        assert header == "case_id,n,tau,b,v,sigma,gamma,sum,bound,pass"
        assert first[0].startswith("a7-000")

    def test_corrupt_constant_negative_control(self, tmp_path, capsys):
        code = cli.main(["bounds", "--suite", "A7", "--seed", "3", "--cases", "3",
                         "--corrupt-constant", "--out", str(tmp_path)])
        assert code == 4
        assert "failing cases" in capsys.readouterr().err

    def test_unknown_suite(self, tmp_path, capsys):
        with pytest.raises(SystemExit):
            cli.main(["bounds", "--suite", "A9", "--out", str(tmp_path)])
        capsys.readouterr()


class TestSmooth:
    def test_decay_pass(self, tmp_path):
        out = str(tmp_path)
        assert cli.main(["smooth", "--function", "decay4", "--out", out]) == 0
        with open(os.path.join(out, "smooth_verdict.json")) as fh:
            v = json.load(fh)
        assert v["passed"] and abs(v["slope"] - 4.0) <= 0.3

    def test_trigpoly_exact(self, tmp_path):
        out = str(tmp_path)
        assert cli.main(["smooth", "--function", "trigpoly", "--out", out]) == 0
        with open(os.path.join(out, "smooth_verdict.json")) as fh:
            assert json.load(fh)["exact"]

    def test_mismatched_regularity_fails(self, tmp_path):
        assert cli.main(["smooth", "--function", "decay4", "--l", "6",
                         "--out", str(tmp_path)]) == 4


def test_trigpoly_perturbation_kind_matches_builtin(tmp_path):
    # the declarative mode list reproduces the builtin example exactly
    import numpy as np

    from kamtori import config, kamdriver as kd

    cfg = config.corollary1_config()
    cfg["perturbation"] = {
        "kind": "trigpoly",
        "g2": [{"k": [1, 1], "cos": [1.0]}],
        "g3": [{"k": [1, 0], "sin": [1.0, 0.0]}],
    }
    path = tmp_path / "trig.json"
    path.write_text(json.dumps(cfg))
    spec, opts = config.load_config(str(path))
    ro = kd.RunOptions(gamma=0.05, tol=1e-9)
    run_t, torus_t = kd.run(spec, np.array(opts["xi"]), ro)
    spec_b, _ = config.builtin_spec("corollary1")
    run_b, torus_b = kd.run(spec_b, np.array(opts["xi"]), ro)
    assert run_t.status == run_b.status == kd.CONVERGED
    np.testing.assert_array_equal(torus_t.omega_star, torus_b.omega_star)
    assert torus_t.residual == torus_b.residual


def test_run_determinism(tmp_path):
    digests = []
    for tag in ("r1", "r2"):
        out = str(tmp_path / tag)
        assert cli.main(["run", "--config", CONFIG, "--out", out]) == 0
        digests.append(_digest(os.path.join(out, "diagnostics.csv")))
    assert digests[0] == digests[1]
