import json
import subprocess
import sys

import pytest

from blochb2.cli import run
from blochb2.reports import read_csv, strip_timestamp

TS = "2000-01-01T00:00:00+00:00"


def call(capsys, *argv):
    code = run(list(argv), timestamp=TS)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out else None), err


def test_b2_char(capsys):
    code, rep, _ = call(capsys, "b2-char", "--weight", "radial:0.5", "--max-level", "10")
    assert code == 0 and rep["status"] == "ok"
    assert rep["command"] == "b2-char"
    assert rep["config"]["weight"] == "radial:0.5" and rep["config"]["max_level"] == 10
    assert rep["result"]["characteristic_sq"] == pytest.approx(4 / 3, rel=1e-4)


def test_gamma(capsys):
    code, rep, _ = call(capsys, "gamma", "--weight", "point:-1", "--tol", "0.01")
    assert code == 0
    assert rep["result"]["value"] == pytest.approx(0.5, rel=0.05)


def test_counterexample(capsys):
    code, rep, _ = call(capsys, "counterexample", "--spec", "factorial", "--terms", "10", "--samples", "1000", "--eps", "0.5", "--pair-budget", "1000")
    assert code == 0
    assert len(rep["result"]["floors"]) == 4
    assert rep["result"]["n"][-1] == 3628800


def test_divergent_exit_code(capsys):
    code, rep, _ = call(capsys, "b2-char", "--weight", "point:-2.5", "--max-level", "6")
    assert code == 2 and rep["status"] == "divergent"


def test_invalid_input(capsys):
    code, rep, err = call(capsys, "b2-char", "--weight", "nonsense:1")
    assert code == 1 and rep is None
    assert json.loads(err)["error"]["key"] == "weight"
    code, _, err = call(capsys, "b2-char", "--max-level", "x")
    assert code == 1 and json.loads(err)["error"]["key"] == "max-level"


def test_deterministic_except_timestamp(capsys):
    run(["osc-const", "--weight", "radial:1", "--pair-budget", "1000"], timestamp="a")
    a = json.loads(capsys.readouterr().out)
    run(["osc-const", "--weight", "radial:1", "--pair-budget", "1000"], timestamp="b")
    b = json.loads(capsys.readouterr().out)
    assert a["timestamp"] != b["timestamp"]
    assert strip_timestamp(a) == strip_timestamp(b)


def test_config_roundtrip(capsys, tmp_path):
    code, rep, _ = call(capsys, "b2-char", "--weight", "radial:0.5", "--max-level", "6")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({k: v for k, v in rep["config"].items() if k != "jobs"}))
    code2, rep2, _ = call(capsys, "--config", str(cfg), "b2-char")
    assert code == code2 == 0
    assert strip_timestamp(rep) == strip_timestamp(rep2)


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = call(capsys, "--config", str(cfg), "b2-char")
    assert code == 1 and json.loads(err)["error"]["key"] == "bogus"


def test_output_and_csv(capsys, tmp_path):
    out, grid = tmp_path / "r.json", tmp_path / "g.csv"
    code = run(["--output", str(out), "--csv", str(grid), "bloch-norm", "--function", "log", "--levels", "10", "--radii", "0.5,0.9,0.99"], timestamp=TS)
    assert code == 0 and capsys.readouterr().out == ""
    rep = json.loads(out.read_text())
    header, data = read_csv(grid)
    assert data.dtype.name == "float64" and data.shape[1] == len(header)
    assert rep["result"]["seminorm"] == pytest.approx(2.0, abs=0.01)


def test_jobs_env(capsys, monkeypatch):
    monkeypatch.setenv("BLOCHB2_JOBS", "2")
    code, rep, _ = call(capsys, "vanishing-profile", "--weight", "const", "--deltas", "0.5,0.25", "--max-level", "4")
    assert code == 0 and rep["config"]["jobs"] == 2


def test_project_and_confid(capsys):
    code, rep, _ = call(capsys, "project", "--integrand", "abs2", "--points", "0,0.5")
    assert code == 0
    assert all(abs(complex(*v) - 0.5) < 1e-6 for v in rep["result"]["values"])
    code, rep, _ = call(capsys, "confid-residual", "--z", "0.5", "--levels", "0,1,2,3,4")
    assert code == 0


def test_spectrum_truncation(capsys):
    code, rep, _ = call(capsys, "spectrum", "truncation", "--function", "z", "--N", "16")
    assert code == 0 and rep["result"]["radius"] == 0.0


def test_sarason(capsys):
    code, rep, _ = call(capsys, "sarason", "--spaces", "200")
    assert code == 0 and rep["result"]["violations"] == 0


def test_report_merge(capsys, tmp_path):
    paths = []
    for i, w in enumerate(["radial:0.5", "point:-2.5"]):
        p = tmp_path / f"r{i}.json"
        run(["--output", str(p), "b2-char", "--weight", w, "--max-level", "6"], timestamp=TS)
        paths.append(str(p))
    code, rep, _ = call(capsys, "report-merge", *paths)
    assert rep["result"]["count"] == 2 and rep["result"]["status"] == "divergent"


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "blochb2.cli", "bloch-norm", "--function", "z", "--levels", "4"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["seminorm"] == pytest.approx(1.0)
