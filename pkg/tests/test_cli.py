import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mallows_ma.cli import main
from mallows_ma.simlab import ResultRow, write_result_csv
from mallows_ma.spectral import canonical_basis, write_basis_csv, write_coefs_csv

from conftest import random_basis

MINIMAL = """\
[experiment]
scenario = nested
n = 100
methods = mma_group
replications = 1
seed = 3
"""


def write_y(path, y):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"])
        for v in y:
            w.writerow([repr(float(v))])


def read_fitted(path):
    with open(path) as fh:
        return np.array([float(r["fitted"]) for r in csv.DictReader(fh)])


def read_fit(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(MINIMAL)
    return path


class TestSimulate:
    def test_minimal(self, tmp_path, config):
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "run")]) == 0
        lines = (tmp_path / "run" / "results.csv").read_text().splitlines()
        assert len(lines) == 2 and lines[1].startswith("nested,mma_group,100,100,1,")
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["seed"] == 3 and manifest["config_text"] == MINIMAL
        assert manifest["config"]["methods"] == ["mma_group"]

    def test_same_seed_same_bytes(self, tmp_path, config):
        for d in ("a", "b"):
            assert main(["simulate", "--config", str(config), "--out", str(tmp_path / d), "--seed", "11"]) == 0
        a, b = (tmp_path / "a" / "results.csv").read_bytes(), (tmp_path / "b" / "results.csv").read_bytes()
        assert a == b
        assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()

    def test_seed_override_changes_output(self, tmp_path, config):
        main(["simulate", "--config", str(config), "--out", str(tmp_path / "a")])
        main(["simulate", "--config", str(config), "--out", str(tmp_path / "b"), "--seed", "4"])
        assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "b" / "results.csv").read_bytes()

    def test_svg_format(self, tmp_path, config):
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path), "--format", "svg"]) == 0
        assert (tmp_path / "nested.svg").read_text().startswith("<?xml")

    def test_missing_file(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)]) == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_config_error_names_line_and_field(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text(MINIMAL.replace("mma_group", "lasso"))
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "bad.ini:4" in err and "experiment.methods" in err

    def test_bad_arguments(self, config, tmp_path):
        assert main(["simulate", "--config", str(config), "--threads", "0", "--out", str(tmp_path)]) == 2
        assert main(["simulate"]) == 2
        assert main(["bogus"]) == 2

    def test_module_entry_point(self, tmp_path, config):
        proc = subprocess.run([sys.executable, "-m", "mallows_ma", "simulate", "--config", str(config),
                               "--out", str(tmp_path)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr


class TestFit:
    def test_adap_noiseless_projection(self, tmp_path, rng):
        b = random_basis(rng, 12, 4)
        write_basis_csv(b, tmp_path / "psi.csv")
        y = b.columns[:, 0]
        write_y(tmp_path / "y.csv", y)
        assert main(["fit", "--data", str(tmp_path / "y.csv"), "--basis", str(tmp_path / "psi.csv"),
                     "--method", "adap", "--sigma2", "0", "--out", str(tmp_path)]) == 0
        np.testing.assert_allclose(read_fitted(tmp_path / "fitted.csv"), y, atol=1e-12)

    def test_mma_single_candidate(self, tmp_path, rng):
        b = random_basis(rng, 12, 4)
        write_basis_csv(b, tmp_path / "psi.csv")
        y = rng.standard_normal(12)
        write_y(tmp_path / "y.csv", y)
        (tmp_path / "cands.txt").write_text("1,2\n")
        assert main(["fit", "--data", str(tmp_path / "y.csv"), "--basis", str(tmp_path / "psi.csv"),
                     "--method", "mma", "--candidates", str(tmp_path / "cands.txt"), "--sigma2", "1",
                     "--out", str(tmp_path)]) == 0
        P = b.columns[:, :2]
        np.testing.assert_allclose(read_fitted(tmp_path / "fitted.csv"), P @ (P.T @ y) / 12, atol=1e-12)
        weights = [r for r in read_fit(tmp_path / "fit.csv") if r["field"] == "weight"]
        assert [float(r["value"]) for r in weights] == [1.0]

    def test_values_round_trip(self, tmp_path, rng):
        b = random_basis(rng, 10, 3)
        write_basis_csv(b, tmp_path / "psi.csv")
        y = rng.standard_normal(10)
        write_y(tmp_path / "y.csv", y)
        main(["fit", "--data", str(tmp_path / "y.csv"), "--basis", str(tmp_path / "psi.csv"),
              "--method", "hard", "--sigma2", "0", "--out", str(tmp_path)])
        from mallows_ma.estimators import hard_threshold_fit
        from mallows_ma.spectral import read_basis_csv
        direct = hard_threshold_fit(y, read_basis_csv(tmp_path / "psi.csv"), 0.0).fitted
        np.testing.assert_array_equal(read_fitted(tmp_path / "fitted.csv"), direct)

    def test_design_matrix(self, tmp_path, rng):
        X = rng.standard_normal((15, 20))
        with open(tmp_path / "X.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j}" for j in range(20)])
            w.writerows([[repr(float(v)) for v in r] for r in X])
        write_y(tmp_path / "y.csv", rng.standard_normal(15))
        assert main(["fit", "--data", str(tmp_path / "y.csv"), "--design", str(tmp_path / "X.csv"),
                     "--method", "mma", "--candidates", "all_nested", "--sigma2", "1", "--out", str(tmp_path)]) == 0
        assert len(read_fitted(tmp_path / "fitted.csv")) == 15

    def test_n_mismatch(self, tmp_path, rng):
        write_basis_csv(canonical_basis(6, 2), tmp_path / "psi.csv")
        write_y(tmp_path / "y.csv", np.ones(5))
        assert main(["fit", "--data", str(tmp_path / "y.csv"), "--basis", str(tmp_path / "psi.csv"),
                     "--method", "soft", "--sigma2", "1", "--out", str(tmp_path)]) == 2

    def test_malformed_csv(self, tmp_path):
        (tmp_path / "y.csv").write_text("y\n1.0\nabc\n")
        write_basis_csv(canonical_basis(2, 1), tmp_path / "psi.csv")
        assert main(["fit", "--data", str(tmp_path / "y.csv"), "--basis", str(tmp_path / "psi.csv"),
                     "--method", "adap", "--sigma2", "1", "--out", str(tmp_path)]) == 2

    def test_basis_choice(self, tmp_path):
        write_y(tmp_path / "y.csv", np.ones(4))
        assert main(["fit", "--data", str(tmp_path / "y.csv"), "--method", "adap", "--out", str(tmp_path)]) == 2


class TestOracle:
    def run(self, tmp_path, theta, sigma2, n, kind="all"):
        write_coefs_csv(theta, tmp_path / "theta.csv", "theta")
        code = main(["oracle", "--theta", str(tmp_path / "theta.csv"), "--sigma2", str(sigma2), "--n", str(n),
                     "--candidates", kind, "--out", str(tmp_path)])
        with open(tmp_path / "oracle.csv") as fh:
            return code, {r["candidates"]: float(r["risk"]) for r in csv.DictReader(fh)}

    def test_zero_signal(self, tmp_path):
        code, risks = self.run(tmp_path, np.zeros(3), 1.0, 10, "all_subset")
        assert code == 0 and risks == {"all_subset": 0.0}

    def test_symmetric_case(self, tmp_path):
        _, risks = self.run(tmp_path, [0.1], 1.0, 100, "all_subset")
        assert risks["all_subset"] == pytest.approx(0.005)

    def test_ordering_across_sets(self, tmp_path, rng):
        _, risks = self.run(tmp_path, rng.standard_normal(12), 1.0, 50)
        assert risks["all_subset"] <= risks["all_nested"] <= risks["group_blocks"] + 1e-12

    def test_n_smaller_than_p(self, tmp_path):
        write_coefs_csv(np.ones(5), tmp_path / "theta.csv")
        assert main(["oracle", "--theta", str(tmp_path / "theta.csv"), "--sigma2", "1", "--n", "3",
                     "--out", str(tmp_path)]) == 2


def result_rows():
    rows = []
    for p in (10, 20, 50):
        for m, r in (("adap", 2.0), ("hard", 1.5), ("soft", 3.0)):
            rows.append(ResultRow("all_subset", m, 400, p, 10, 0.01 * r, 0.01, r + math.log(p) / 10, 0.1, r + 1))
    return rows


class TestPlot:
    def test_empty(self, tmp_path):
        write_result_csv([], tmp_path / "r.csv")
        assert main(["plot", "--results", str(tmp_path / "r.csv"), "--out", str(tmp_path)]) == 0
        svg = (tmp_path / "empty.svg").read_text()
        assert "no data" in svg and "<path" not in svg

    def test_reference_curve(self, tmp_path):
        write_result_csv(result_rows(), tmp_path / "r.csv")
        assert main(["plot", "--results", str(tmp_path / "r.csv"), "--out", str(tmp_path)]) == 0
        svg = (tmp_path / "all_subset_n400.svg").read_text()
        assert 'class="reference"' in svg and 'stroke-dasharray="6,4"' in svg

    def test_idempotent(self, tmp_path):
        write_result_csv(result_rows(), tmp_path / "r.csv")
        main(["plot", "--results", str(tmp_path / "r.csv"), "--out", str(tmp_path / "a")])
        main(["plot", "--results", str(tmp_path / "r.csv"), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "all_subset_n400.svg").read_bytes() == (tmp_path / "b" / "all_subset_n400.svg").read_bytes()

    def test_unknown_columns(self, tmp_path):
        (tmp_path / "r.csv").write_text("scenario,method,n,colour\nnested,adap,1,red\n")
        assert main(["plot", "--results", str(tmp_path / "r.csv"), "--out", str(tmp_path)]) == 2

    def test_missing_results(self, tmp_path):
        assert main(["plot", "--results", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 2
