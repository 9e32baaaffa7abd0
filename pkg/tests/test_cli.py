from __future__ import annotations

import csv
import json
import math
import subprocess
import sys

import pytest

from hitshape.cli import main

B1, B2 = 3 - math.sqrt(5), 3 + math.sqrt(5)


def write_string(tmp_path, atoms, start="0", target="1", pieces=(), name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps({"atoms": [{"x": x, "m": m} for x, m in atoms],
                             "pieces": list(pieces), "start": start, "target": target}))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_two_atom_fixture(tmp_path, capsys):
    path = write_string(tmp_path, [("0", "1"), ("0.5", "1")])
    code, out, _ = run(capsys, "analyze", "--input", path)
    assert code == 0
    r = json.loads(out)
    assert r["rates"] == pytest.approx([B1, B2], rel=1e-14)
    assert r["polynomials"]["reflected_at_target"] == ["1", "3/2", "1/4"]
    assert r["factorization"]["mu1_rates"] == pytest.approx([4.0])
    assert r["factorization"]["mu2_weights"] == pytest.approx([0.947214, 0.052786], abs=1e-6)
    assert r["interlacing"]["ok"]
    assert r["moments"]["mean_exact"] == "3/2"
    assert r["manifest"]["precision"] == "rational"


def test_analyze_single_atom(tmp_path, capsys):
    path = write_string(tmp_path, [("0", "1")])
    code, out, _ = run(capsys, "analyze", "--input", path, "--precision", "double")
    r = json.loads(out)
    assert code == 0 and r["rates"] == pytest.approx([1.0])
    assert r["dirichlet_rates"] == [] and r["factorization"]["mu2_weights"] == [1.0]


def test_analyze_csv_output_and_manifest(tmp_path, capsys):
    path = write_string(tmp_path, [("0", "1"), ("0.5", "1")])
    out = tmp_path / "d.csv"
    assert run(capsys, "analyze", "--input", path, "--format", "csv", "--output", str(out),
               "--max-order", "2")[0] == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["t", "f", "d1", "d2"]
    assert json.loads((tmp_path / "d.manifest.json").read_text())["command"] == "analyze"


def test_duplicate_position_is_an_input_error(tmp_path, capsys):
    path = write_string(tmp_path, [("0", "1"), ("0", "2")])
    code, _, err = run(capsys, "analyze", "--input", path)
    assert code == 2
    e = json.loads(err.strip().splitlines()[-1])
    assert e["type"] == "StringError" and "duplicate position" in e["message"]


def test_missing_input_file(tmp_path, capsys):
    assert run(capsys, "analyze", "--input", str(tmp_path / "nope.json"))[0] == 2


def test_classify_to_file(tmp_path, capsys):
    path = write_string(tmp_path, [("0", "1"), ("0.5", "1")])
    out = tmp_path / "c.json"
    code, _, err = run(capsys, "classify", "--input", path, "--output", str(out))
    assert code == 0 and "Whale" in err
    r = json.loads(out.read_text())
    assert r["classification"] == "Whale"
    assert (tmp_path / "c.manifest.json").exists()


def test_classify_gig(capsys):
    code, out, _ = run(capsys, "classify", "--gig", "0.5,1,1")
    assert code == 0 and json.loads(out)["classification"] == "Bell(6)"
    assert run(capsys, "classify", "--gig", "0.5,-1,1")[0] == 2
    assert run(capsys, "classify", "--gig", "1,2")[0] == 2


def test_simulate_is_seeded(tmp_path, capsys):
    path = write_string(tmp_path, [("0", "1"), ("0.5", "1")])
    argv = ["simulate", "--input", path, "--samples", "20000", "--seed", "42"]
    code, out, _ = run(capsys, *argv)
    again = run(capsys, *argv, "--workers", "4")[1]
    assert code == 0 and out == again
    s = json.loads(out)["summary"]
    assert s["ks_pass"] and abs(s["mean_zscore"]) < 3


def test_simulate_csv(tmp_path, capsys):
    path = write_string(tmp_path, [("0", "1")])
    out = tmp_path / "tau.csv"
    run(capsys, "simulate", "--input", path, "--samples", "100", "--format", "csv",
        "--output", str(out))
    assert len(out.read_text().splitlines()) == 101
    assert json.loads((tmp_path / "tau.summary.json").read_text())["n_samples"] == 100


def test_converge_brownian(tmp_path, capsys):
    path = write_string(tmp_path, [], pieces=[{"from": "0", "to": "1", "density": "2"}])
    code, out, _ = run(capsys, "converge", "--input", path, "--k-list", "8,16", "--max-order", "3",
                       "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [r["k"] for r in rows] == ["8", "16"]
    assert all(float(r["mean"]) == 1.0 for r in rows)
    assert rows[1]["zeros_d3"] == "3"


def test_converge_needs_pieces(tmp_path, capsys):
    path = write_string(tmp_path, [("0", "1")])
    assert run(capsys, "converge", "--input", path)[0] == 2


def test_sweep_with_injected_duplicate(capsys):
    code, out, _ = run(capsys, "sweep", "--count", "3", "--seed", "5", "--inject-duplicate")
    r = json.loads(out)
    assert code == 1
    assert r["summary"]["passed"] == 3
    assert "duplicate position" in r["rows"][-1]["error"]


def test_module_entry_point(tmp_path):
    path = write_string(tmp_path, [("0", "1")])
    p = subprocess.run([sys.executable, "-m", "hitshape", "classify", "--input", path,
                        "--max-order", "2"], capture_output=True, text=True)
    assert p.returncode == 0
    assert json.loads(p.stdout)["classification"] == "Monotone"
