#!/usr/bin/env python3
"""
End-to-end tests of the binmom command line
"""

import contextlib
import io
import json
import os
import sys
import tempfile

import numpy as np

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from bench import parse_csv
from database import ResultStore
from main import load_family, main
from quadexp import QuadExpFamily
from testkit import run_all_tests
from utils import read_matrix, write_matrix

TARGET = np.array([[0.5, 0.3, 0.2],
                   [0.3, 0.6, 0.35],
                   [0.2, 0.35, 0.4]])


def _run(*argv):
    """Run the CLI and capture (exit code, stdout, stderr)"""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def test_genmatrix_to_stdout_and_file():
    code, out, _ = _run("genmatrix", "--dim", 4, "--rho", 0.5, "--seed", 3, "--steps", 3, "--sweeps", 10)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "4" and len(lines) == 5
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "m.txt")
        code, _, _ = _run("genmatrix", "--dim", 4, "--rho", 0.5, "--seed", 3, "--steps", 3, "--sweeps", 10,
                          "--out", path)
        assert code == 0
        from_file = read_matrix(path)
    from_stdout = np.array([[float(v) for v in line.split()] for line in lines[1:]])
    assert np.array_equal(from_file, from_stdout)


def test_fit_and_sample_logistic():
    with tempfile.TemporaryDirectory() as tmp:
        matrix_path = os.path.join(tmp, "target.txt")
        family_path = os.path.join(tmp, "family.json")
        write_matrix(matrix_path, TARGET)
        code, out, _ = _run("fit", "--matrix", matrix_path, "--family", "logistic", "--mode", "exact",
                            "--out", family_path)
        assert code == 0
        report = json.loads(out)
        assert report["family"] == "logistic" and report["estimator"] == "exact"
        assert report["lambda_min"] == 1.0
        assert load_family(family_path).dim == 3

        code, out, _ = _run("sample", "--family", family_path, "--n", 25, "--seed", 9)
        assert code == 0
        rows = [line.split() for line in out.strip().splitlines()]
        assert len(rows) == 25 and all(len(row) == 3 and set(row) <= {"0", "1"} for row in rows)


def test_fit_truncated_linear_via_link_alias():
    with tempfile.TemporaryDirectory() as tmp:
        matrix_path = os.path.join(tmp, "target.txt")
        write_matrix(matrix_path, TARGET)
        code, out, _ = _run("fit", "--matrix", matrix_path, "--link", "truncated-linear", "--mode", "exact")
    assert code == 0
    payload = json.loads(out)
    assert payload["report"]["family"] == "truncated-linear"
    assert payload["family"]["link"] == "truncated-linear"


def test_fit_gaussian_copula():
    with tempfile.TemporaryDirectory() as tmp:
        matrix_path = os.path.join(tmp, "target.txt")
        family_path = os.path.join(tmp, "copula.json")
        write_matrix(matrix_path, TARGET)
        code, out, _ = _run("fit", "--matrix", matrix_path, "--family", "gaussian-copula", "--out", family_path)
        assert code == 0
        report = json.loads(out)
        assert report["family"] == "gaussian-copula"
        assert report["max_pair_residual"] < 1e-7
        code, out, _ = _run("sample", "--family", family_path, "--n", 5)
        assert code == 0 and len(out.strip().splitlines()) == 5


def test_fit_gaussian_short_name():
    with tempfile.TemporaryDirectory() as tmp:
        matrix_path = os.path.join(tmp, "target.txt")
        write_matrix(matrix_path, TARGET)
        code, out, _ = _run("fit", "--matrix", matrix_path, "--family", "gaussian")
    assert code == 0
    payload = json.loads(out)
    assert payload["report"]["family"] == "gaussian-copula"
    assert payload["family"]["kind"] == "gaussian-copula"


def test_fit_report_in_default_mode_is_json():
    with tempfile.TemporaryDirectory() as tmp:
        matrix_path = os.path.join(tmp, "target.txt")
        write_matrix(matrix_path, [[0.5, 0.3], [0.3, 0.5]])
        code, out, _ = _run("fit", "--matrix", matrix_path)
    assert code == 0
    rows = json.loads(out)["report"]["rows"]
    assert [row["jacobian_positive"] for row in rows] == [True, True]


def test_derive_and_mh_demo():
    params = np.array([[0.2, 0.0, 0.0], [0.4, -0.3, 0.0], [-0.2, 0.3, 0.1]])
    with tempfile.TemporaryDirectory() as tmp:
        target_path = os.path.join(tmp, "qe.json")
        proposal_path = os.path.join(tmp, "logistic.json")
        with open(target_path, "w", encoding="utf-8") as handle:
            json.dump(QuadExpFamily(params).to_dict(), handle)
        code, _, _ = _run("derive", "--quadexp", target_path, "--out", proposal_path)
        assert code == 0
        assert load_family(proposal_path).link.kind == "logistic"

        code, out, _ = _run("mh-demo", "--target", target_path, "--proposal", proposal_path,
                            "--steps", 500, "--seed", 2)
        assert code == 0
        stats = json.loads(out)
        assert 0.0 < stats["acceptance_rate"] <= 1.0
        assert len(stats["mean"]) == 3

        code, _, err = _run("mh-demo", "--target", proposal_path, "--proposal", proposal_path)
        assert code == 1 and "exponential quadratic" in err


def test_bench_writes_csv_svg_and_database():
    config = {"dims": [3], "levels": 2, "matrices": 2, "families": ["logistic", "gaussian-copula"],
              "sweeps": 10, "permutation_steps": 3, "omegas": 4, "seed": 5}
    with tempfile.TemporaryDirectory() as tmp:
        config_path = os.path.join(tmp, "bench.json")
        csv_path = os.path.join(tmp, "out", "records.csv")
        svg_dir = os.path.join(tmp, "figures")
        db_path = os.path.join(tmp, "runs.db")
        with open(config_path, "w", encoding="utf-8") as handle:
            json.dump(config, handle)
        code, _, _ = _run("bench", "--config", config_path, "--out-csv", csv_path, "--out-svg", svg_dir,
                          "--db", db_path, "--label", "smoke")
        assert code == 0
        records = parse_csv(csv_path)
        assert len(records) == 8
        assert sorted(os.listdir(svg_dir)) == ["tau_copula.svg", "tau_logistic.svg"]
        store = ResultStore(db_path)
        runs = store.list_runs()
        stored = store.load_records(runs[0][0])
        store.close()
        assert [r.to_row() for r in stored] == [r.to_row() for r in records]


def test_errors_exit_with_one():
    with tempfile.TemporaryDirectory() as tmp:
        bad = os.path.join(tmp, "bad.txt")
        with open(bad, "w", encoding="utf-8") as handle:
            handle.write("2\n0.5 0.3\n0.1 0.5\n")
        code, _, err = _run("fit", "--matrix", bad)
        assert code == 1 and "symmetric" in err
        code, _, _ = _run("fit", "--matrix", os.path.join(tmp, "missing.txt"))
        assert code == 1
        infeasible = os.path.join(tmp, "infeasible.txt")
        write_matrix(infeasible, [[0.5, 0.6], [0.6, 0.5]])
        code, _, _ = _run("fit", "--matrix", infeasible, "--mode", "exact")
        assert code == 1


if __name__ == "__main__":
    sys.exit(0 if run_all_tests(globals(), "command line tests") else 1)
