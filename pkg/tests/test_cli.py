import csv
import io
import json

import pytest

from optstop.cli import run

from conftest import problem_path


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def diag(err: str) -> dict:
    lines = err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


def test_solve_box():
    code, out, _ = call("solve", problem_path("box"))
    assert code == 0
    rep = json.loads(out)
    assert rep["variant"] == "TwoSided"
    assert rep["x1"] == pytest.approx(-2.0, abs=1e-8) and rep["x2"] == pytest.approx(2.0, abs=1e-8)
    assert rep["validation"]["verdict"] == "pass"
    assert rep["meta"]["classification"]["kind"] == "Solvable"
    assert "residual_ode" in rep["tolerances"]


def test_classify_exp():
    code, out, _ = call("classify", problem_path("exp"))
    assert code == 0
    rep = json.loads(out)
    assert rep["kind"] == "Case1"
    assert rep["Kplus"] == pytest.approx(3.0, abs=1e-8) and rep["Kminus"] == pytest.approx(3.0, abs=1e-8)
    assert rep["details"]["A1"] is False


def test_vanishing_sigma_is_a_config_error():
    code, out, err = call("solve", problem_path("sigma-zero"))
    assert code == 4 and out == ""
    d = diag(err)
    assert d["exit"] == 4 and "Engelbert-Schmidt" in d["message"]


def test_no_optimum_exit_code_keeps_report():
    code, out, err = call("solve", problem_path("exp"), "--sequence", "3", "--x=0")
    assert code == 3
    rep = json.loads(out)
    assert rep["variant"] == "NoOptimum" and len(rep["sequence"]) == 3
    assert rep["values"][0]["V"] == pytest.approx(3.0, abs=1e-8)
    assert diag(err)["error"] == "NoOptimum"


def test_shoot_no_root():
    code, out, err = call("shoot", problem_path("exp"))
    assert code == 3
    assert json.loads(out)["variant"] == "NoRoot"
    assert diag(err)["exit"] == 3


def test_shoot_dumps_trajectory(tmp_path):
    path = tmp_path / "traj.csv"
    code, out, _ = call("shoot", problem_path("box"), "--window=-3,-1.01", "--dump-trajectory", str(path))
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["x", "V", "W"]
    assert max(float(r["V"]) for r in rows) == pytest.approx(2.0, abs=1e-8)


@pytest.mark.parametrize("name", ["box", "drift"])
def test_solve_then_verify_round_trip(tmp_path, name):
    rep = tmp_path / "sol.json"
    code, out, _ = call("solve", problem_path(name))
    assert code == 0
    rep.write_text(out)
    code, out, _ = call("verify", problem_path(name), "--oracle", "--solution", str(rep))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["x", "solver", "oracle", "absdiff"]
    assert len(rows) == 21 and max(float(r["absdiff"]) for r in rows) <= 1e-6


def test_verify_mc_csv_columns():
    code, out, _ = call("verify", problem_path("box"), "--mc", "--paths", "4000", "--seed", "1", "--x=0,1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["rule", "x0", "mean", "stderr", "z", "truncated_fraction"]
    assert len(rows) == 2


def test_verify_both_gives_json():
    code, out, _ = call("verify", problem_path("box"), "--mc", "--oracle", "--paths", "2000", "--points", "5")
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"oracle", "mc"} and len(doc["oracle"]) == 5


def test_payoff_and_curve(tmp_path):
    code, out, _ = call("payoff", problem_path("box"), "-1.5", "1", "--x=0,0.5")
    assert code == 0 and json.loads(out)["ok"]
    curve = tmp_path / "v.csv"
    ns = tmp_path / "p.csv"
    code, _, _ = call("solve", problem_path("drift"), "--curve", str(curve), "--natural-scale", str(ns),
                      "--grid=-2,3,11")
    assert code == 0
    assert list(csv.DictReader(curve.open()))[0].keys() == {"x", "V", "dV"}
    assert len(list(csv.DictReader(ns.open()))) == 11
    code, out, _ = call("curve", problem_path("box"), "--grid=-3,3,7")
    assert code == 0 and out.splitlines()[0] == "x,V,dV"


@pytest.mark.parametrize("argv", [
    ["nope"],
    ["solve"],
    ["solve", "/no/such/file.json"],
    ["verify", "PROBLEM"],
    ["shoot", "PROBLEM", "--window=2,1"],
    ["solve", "PROBLEM", "--grid=0,1,x"],
])
def test_config_errors(argv):
    argv = [problem_path("box") if a == "PROBLEM" else a for a in argv]
    code, _, err = call(*argv)
    assert code == 4
    assert diag(err)["exit"] == 4


def test_classify_needs_undiscounted_problem():
    code, _, err = call("classify", problem_path("ou"))
    assert code == 4 and diag(err)["error"] == "PreconditionError"
