import json
from pathlib import Path

import pytest

from parahyp.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_solve_zero_source(tmp_path, capsys):
    code, _ = run(capsys, "solve", "--config", str(CONFIGS / "zero.json"), "--out", str(tmp_path))
    assert code == 0
    res = json.loads((tmp_path / "residuals.json").read_text())
    assert res["passed"] is True
    rows = (tmp_path / "solution.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[-1]) == 0.0 for r in rows)
    assert (tmp_path / "manifest.json").exists()


def test_solve_is_deterministic(tmp_path, capsys):
    cfg = str(CONFIGS / "hyperbolic-constant.json")
    for d in ("a", "b"):
        assert run(capsys, "solve", "--config", cfg, "--out", str(tmp_path / d))[0] == 0
    for name in ("solution.csv", "trace.csv", "residuals.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_alpha_zero_is_rejected(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"alpha": 0, "beta": 1}')
    code, out = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 2
    assert "alpha != 0" in out


def test_empty_config_reports_parse_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("")
    code, out = run(capsys, "solve", "--config", str(cfg))
    assert code == 2
    err = json.loads(out)
    assert err["error"] == "config_parse" and "line" in err


def test_kernel_eval(capsys):
    code, out = run(capsys, "kernel-eval", "0.2", "0.3", "0.6", "0.5")
    assert code == 0
    assert json.loads(out) == {"K": 0.0, "sector": "parabolic-parabolic (causal zero)"}
    code, _ = run(capsys, "kernel-eval", "0.5000000001", "0.3", "0.5", "0.6")
    assert code == 3


def test_separable_spectrum(tmp_path, capsys):
    code, _ = run(capsys, "spectrum", "--config", str(CONFIGS / "separable-surrogate.json"),
                  "--out", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "spectrum.json").read_text())
    assert rep["lidskii_gap"] < 1e-10
    assert (tmp_path / "eigenvalues.csv").exists()


def test_defaults(capsys):
    code, out = run(capsys, "defaults")
    assert code == 0
    assert json.loads(out)["spectral"]["quad_m"] == 12
