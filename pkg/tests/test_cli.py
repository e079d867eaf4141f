"""Command-line front door: exit codes, artifacts, determinism."""

import json

import pytest

from maxcap.cli import main

HERMITE_CFG = {
    "field": {"p_coeffs": [0, 0, 1], "epsilon": 0.2},
    "triple": {"P_C": [], "P_Theta": [[0, 1]]},
    "init": {
        "kind": "segment", "a": -3, "b": 3, "n": 241,
        "rays": [[1, "head"], [0, "tail"]],
    },
    "solver": {"n": 300},
    "window": {"xmin": -3, "xmax": 3, "ymin": -3, "ymax": 3,
               "resolution": 161},
    "seed": 0,
}


@pytest.fixture()
def cfg_path(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(HERMITE_CFG))
    return p


def _run(command, cfg, out, extra=()):
    return main([command, "--config", str(cfg), "--out", str(out), *extra])


class TestExitCodes:
    def test_validate_ok(self, cfg_path, tmp_path):
        out = tmp_path / "out"
        assert _run("validate", cfg_path, out) == 0
        result = json.loads((out / "result.json").read_text())
        assert result["violations"] == []

    def test_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"triple": {"P_C": [[0]]}}))  # no P_Theta
        out = tmp_path / "out"
        assert _run("validate", bad, out) == 2
        assert json.loads((out / "error.json").read_text())["kind"] == "config"

    def test_numeric_error(self, tmp_path):
        # the window is smaller than the support: tail verification for the
        # Lambda region cannot succeed, a numeric (not config) failure
        cfg = dict(HERMITE_CFG,
                   window={"xmin": -1, "xmax": 1, "ymin": -1, "ymax": 1,
                           "resolution": 81})
        p = tmp_path / "run.json"
        p.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        assert _run("construct", p, out) == 3
        assert json.loads((out / "error.json").read_text())["kind"] == "numeric"

    def test_verify_passes(self, cfg_path, tmp_path):
        out = tmp_path / "out"
        assert _run("verify", cfg_path, out) == 0
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["pass"] is True
        assert set(verdict["checks"]) == {
            "el_residual", "criticality", "s_property", "spectral"}

    def test_verify_fails_with_tight_threshold(self, tmp_path):
        cfg = dict(HERMITE_CFG, verify={"criticality": 1e-12})
        p = tmp_path / "run.json"
        p.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        assert _run("verify", p, out) == 1
        assert json.loads((out / "verdict.json").read_text())["pass"] is False


class TestArtifacts:
    def test_sectors(self, cfg_path, tmp_path):
        out = tmp_path / "out"
        assert _run("sectors", cfg_path, out) == 0
        res = json.loads((out / "result.json").read_text())
        assert len(res["angles"]) == 2

    def test_levelset_flag(self, cfg_path, tmp_path):
        out = tmp_path / "out"
        assert _run("levelset", cfg_path, out, ("--M", "4")) == 0
        assert (out / "result.json").exists()

    def test_manifest(self, cfg_path, tmp_path):
        out = tmp_path / "out"
        assert _run("equilibrium", cfg_path, out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "equilibrium"
        assert len(manifest["config_sha256"]) == 64
        assert "numpy" in manifest["versions"]
        # every artifact except the manifest itself is hashed
        files = {f.name for f in out.iterdir()} - {"manifest.json"}
        assert set(manifest["outputs"]) == files

    def test_determinism(self, cfg_path, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert _run("equilibrium", cfg_path, out1) == 0
        assert _run("equilibrium", cfg_path, out2) == 0
        assert ((out1 / "result.json").read_bytes()
                == (out2 / "result.json").read_bytes())
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["outputs"] == m2["outputs"]
