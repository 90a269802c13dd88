import json
import math
import subprocess
import sys

import pytest

from fragility import cli
from fragility.schemas import validate


def run_json(capsys, *argv):
    assert cli.run(list(argv)) == 0
    return json.loads(capsys.readouterr().out)


def test_acdec_independence(capsys):
    out = run_json(capsys, "acdec", "--norm", "lambda:1", "--gamma", "1,1,1")
    validate("acdec", out)
    assert out["p"] == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)
    assert out["fi"] == pytest.approx(1.0, abs=1e-12)
    assert out["kappa"] == 1 and out["norm"]["family"] == "lambda"


def test_fi_max_norm(capsys):
    out = run_json(capsys, "fi", "--norm", "max", "--gamma", "1,0.5,0.25")
    validate("fi", out)
    assert out["fi"] == pytest.approx(1.75, abs=1e-12)


def test_cluster_marshall_olkin(capsys):
    out = run_json(capsys, "cluster", "--norm", "mo:0.3", "--d", "5", "--kappa", "2")
    validate("cluster", out)
    assert out["mean"] == pytest.approx(2.1, abs=1e-12)
    assert out["kappa"] == 2


def test_vanishes_with_witness(capsys):
    out = run_json(capsys, "vanishes", "--norm", "xi", "--m", "3")
    validate("vanishes", out)
    assert out["result"] is True and out["witness"] is None
    out = run_json(capsys, "vanishes", "--norm", "xi", "--m", "2")
    assert out["result"] is False and out["witness"] == [1, 2]


def test_undefined_fi_exit_code(capsys):
    assert cli.run(["fi", "--norm", "xi", "--m", "3"]) == 3
    assert "undefined" in capsys.readouterr().err
    out = run_json(capsys, "fi", "--norm", "xi", "--m", "3", "--allow-undefined")
    assert out["fi_m"] == {"m": 3, "value": None}
    assert out["fi"] == pytest.approx(12 / 7, abs=1e-12)


@pytest.mark.parametrize(
    "argv",
    [
        ["acdec", "--norm", "lambda:0.5", "--gamma", "1,1"],
        ["acdec", "--norm", "max", "--gamma", "0.5,0.7"],
        ["acdec", "--norm", "max", "--gamma", "1,x"],
        ["acdec", "--norm", "max"],
        ["acdec", "--norm", "bogus", "--d", "2"],
        ["acdec", "--norm", "max", "--d", "3", "--gamma", "1,1"],
        ["cluster", "--norm", "max", "--d", "3", "--kappa", "4"],
        ["fi", "--norm", "max", "--d", "3", "--theta", "0.3"],
        ["fi", "--norm", "max", "--d", "3", "--m", "9"],
        ["sweep"],
        ["acdec", "--norm", "gen:/nonexistent/gen.json"],
    ],
)
def test_invalid_input_exit_code(argv, capsys):
    assert cli.run(argv) == 2
    assert capsys.readouterr().err.startswith("fragility: ")


def test_generator_file(tmp_path, capsys):
    path = tmp_path / "gen.json"
    path.write_text(json.dumps([{"p": 0.5, "z": [2.0, 0.0]}, {"p": 0.5, "z": [0.0, 2.0]}]))
    out = run_json(capsys, "acdec", "--norm", f"gen:{path}")
    assert out["p"] == pytest.approx([1.0, 0.0], abs=1e-12)
    path.write_text(json.dumps([{"p": 0.5, "z": [2.0, 1.0]}, {"p": 0.5, "z": [0.0, 0.5]}]))
    assert cli.run(["acdec", "--norm", f"gen:{path}"]) == 2
    assert "index 2" in capsys.readouterr().err


def test_norm_spec_round_trip(tmp_path, capsys):
    first = run_json(capsys, "acdec", "--norm", "mo:0.25", "--gamma", "1,0.5,0.8")
    spec = tmp_path / "norm.json"
    spec.write_text(json.dumps(first["norm"]))
    second = run_json(capsys, "acdec", "--norm", str(spec), "--gamma", "1,0.5,0.8")
    assert first == second


def test_csv_output(capsys):
    assert cli.run(["acdec", "--norm", "lambda:2", "--d", "2", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,a,p"
    k, a, p = lines[2].split(",")
    assert int(k) == 1
    assert float(p) == pytest.approx(2 - math.sqrt(2), rel=1e-11)
    assert float(a) == pytest.approx(2 * math.sqrt(2) - 2, rel=1e-11)
    assert cli.run(["vanishes", "--norm", "xi", "--m", "2", "--format", "csv"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == "2,false,1 2"


def model_file(tmp_path):
    path = tmp_path / "model.json"
    s = 1 / math.sqrt(2)
    path.write_text(json.dumps({"model": "weighted_pareto", "alpha": 2, "lambda": [[1, 0], [s, s]]}))
    return path


def test_sweep_is_deterministic(tmp_path):
    path = model_file(tmp_path)
    argv = ["sweep", "--model", str(path), "--quantiles", "0.99,0.999", "--n", "50000", "--seed", "4"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.run(argv + ["--out", str(a)]) == 0
    assert cli.run(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("q,s,k,p_hat,p_theory,se,fi_hat,fi_theory,gamma_hat_1,gamma_hat_2\n")


def test_simulate_json(tmp_path, capsys):
    path = model_file(tmp_path)
    out = run_json(capsys, "simulate", "--model", str(path), "--quantiles", "0.99", "--n", "20000", "--seed", "1")
    validate("simulate", out)
    assert out["theory"]["p"] == pytest.approx([2 / 3, 1 / 3], abs=1e-12)
    assert len(out["rows"]) == 1


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "fragility", "fi", "--norm", "lambda:2", "--d", "2"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert json.loads(res.stdout)["fi"] == pytest.approx(math.sqrt(2), abs=1e-12)
