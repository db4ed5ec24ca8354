import io
import json
import subprocess
import sys

import numpy as np
import pytest

from solitonlab import catalog
from solitonlab.cli import dumps, main

CONSTRUCT = ["construct", "--dim", "3", "--fiber", "spaceform:1", "--driver", "yamabe:2", "--init", "0,0,1,0"]


@pytest.fixture
def flat3(tmp_path):
    path = tmp_path / "flat3.json"
    path.write_text(json.dumps(catalog.flat(3).to_json()))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_construct_steady_state_csv(capsys):
    code, out, _ = run(capsys, CONSTRUCT + ["--span", "2"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "r,F,Fp,Fpp,phi,R"
    data = np.loadtxt(io.StringIO(out), delimiter=",", skiprows=1)
    assert np.all(data[:, 3] == 0) and np.allclose(data[:, 5], 2.0, atol=1e-12)


def test_construct_json_fields_and_roundtrip(tmp_path, capsys):
    out = tmp_path / "p.json"
    assert main(["construct", "--dim", "3", "--fiber", "spaceform:1", "--driver", "yamabe:0",
                 "--init", "1,0,1,0", "--span", "3", "-o", str(out)]) == 0
    d = json.loads(out.read_text())
    assert list(d) == ["n", "Rbar", "spec", "termination", "zeros", "span", "branch", "columns"]
    assert list(d["branch"]) == ["branch", "zeros", "provisional", "span"]
    assert list(d["columns"]) == ["r", "F", "Fp", "Fpp", "phi", "R", "Fppp"]
    code, text, _ = run(capsys, ["classify", "--profile", str(out)])
    assert code == 0
    assert json.loads(text)["branch"] == d["branch"]["branch"]


def test_classify_expression_profile(tmp_path, capsys):
    path = tmp_path / "prof.json"
    path.write_text(json.dumps({"profile": {"expr": "sin(r)"}, "interval": [-0.3, 3.5]}))
    code, out, _ = run(capsys, ["classify", "--profile", str(path)])
    assert code == 0 and json.loads(out)["branch"] == "Compact"


def test_tensors_flat(flat3, capsys):
    code, out, _ = run(capsys, ["tensors", "--metric", flat3, "--point", "0,0,0", "--report", "weyl,cotton"])
    assert code == 0
    d = json.loads(out)
    assert d["norms_sq"] == {"weyl": 0.0, "cotton": 0.0}


def test_tensors_caochen_with_potential(flat3, capsys):
    code, out, _ = run(capsys, ["tensors", "--metric", flat3, "--point", "0.1,0.2,0.3",
                                "--report", "schouten,caochen:F=0.5*(x^2+y^2+z^2)"])
    assert code == 0 and json.loads(out)["norms_sq"]["caochen"] == 0.0


def test_levelset_and_critical_point(flat3, capsys):
    code, out, _ = run(capsys, ["levelset", "--metric", flat3, "--F", "0.5*(x^2+y^2+z^2)", "--point", "2,0,0"])
    assert code == 0
    d = json.loads(out)
    assert d["grad_norm"] == pytest.approx(2.0) and d["H"] == pytest.approx(1.0)
    code, out, err = run(capsys, ["levelset", "--metric", flat3, "--F", "0.5*(x^2+y^2+z^2)", "--point", "0,0,0"])
    assert code == 1 and out == ""
    assert json.loads(err)["error"] == "CriticalPoint"


def test_usage_errors_exit_2(capsys):
    assert main(["construct", "--dim", "3"]) == 2
    assert main(CONSTRUCT[:4] + ["torus:1"] + CONSTRUCT[5:]) == 2
    assert main(CONSTRUCT + ["--step", "-1"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(CONSTRUCT + ["--bogus"]) == 2
    capsys.readouterr()


def test_computation_error_exit_1(tmp_path, capsys):
    code, _, err = run(capsys, ["tensors", "--metric", str(tmp_path / "missing.json"), "--point", "0,0,0"])
    assert code == 1 and "error" in json.loads(err)


def test_verify_exit_codes(capsys):
    code, out, _ = run(capsys, ["verify", "--only", "branch"])
    assert code == 0 and "0 failed" in out
    code, out, _ = run(capsys, ["verify", "--only", "calibration", "--tol", "fd=1e-15"])
    assert code == 3


def test_verify_env_seed(monkeypatch, capsys):
    monkeypatch.setenv("SOLITONLAB_SEED", "7")
    code, out, _ = run(capsys, ["verify", "--only", "branch", "--format", "json"])
    assert code == 0 and json.loads(out)["seed"] == 7
    code, out, _ = run(capsys, ["verify", "--only", "branch", "--format", "json", "--seed", "3"])
    assert json.loads(out)["seed"] == 3


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dim": 3, "fiber": "spaceform:1", "driver": "yamabe:2",
                               "init": [0, 0, 1, 0], "span": 1.0, "step": 0.1}))
    code, out, _ = run(capsys, ["construct", "--config", str(cfg)])
    assert code == 0 and len(out.splitlines()) == 1 + 21
    code, out, _ = run(capsys, ["construct", "--config", str(cfg), "--span", "2"])
    assert len(out.splitlines()) == 1 + 41
    cfg.write_text(json.dumps({"dim": 3, "colour": "red"}))
    assert main(["construct", "--config", str(cfg)]) == 2
    capsys.readouterr()


def test_dumps_precision():
    text = dumps({"x": 0.1, "y": [1.0, float("nan")], "s": "a"})
    assert '"x": 0.10000000000000001' in text
    assert "NaN" in text


@pytest.mark.parametrize("cmd", ["construct", "tensors", "classify", "levelset", "verify"])
def test_help_per_subcommand(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    assert "usage" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "solitonlab", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "construct" in out.stdout
