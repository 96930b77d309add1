import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from fourierext.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from fourierext.harness import (
    THREADS_ENV,
    ConfigError,
    ExperimentConfig,
    parse_lambda_grid,
    table_rates,
)
from fourierext.problems import eigen_problem


@pytest.fixture(autouse=True, scope="module")
def _drop_cached_factorizations():
    yield
    eigen_problem.cache_clear()


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestTableRates:
    def test_published_rows(self):
        assert table_rates([3.4619e-3, 4.6741e-5], [20, 40])[0] == pytest.approx(6.211, abs=1e-3)
        assert table_rates([4.6741e-5, 1.7315e-6], [40, 60])[0] == pytest.approx(8.128, abs=1e-3)

    def test_equal_errors(self):
        assert table_rates([1e-3, 1e-3], [10, 20]) == [0.0]

    @pytest.mark.parametrize(
        "errors, ns",
        [([1e-3], [10]), ([1e-3, 0.0], [10, 20]), ([1e-3, 1e-4], [20, 10]), ([1, 2, 3], [1, 2])],
    )
    def test_rejects(self, errors, ns):
        with pytest.raises(ValueError):
            table_rates(errors, ns)


class TestLambdaGrid:
    def test_inclusive_grid(self):
        grid = parse_lambda_grid("0:0.1:14")
        assert grid.size == 141
        assert grid[0] == 0.0 and grid[-1] == 14.0 and grid[3] == 0.3

    def test_half_steps(self):
        assert parse_lambda_grid("0.5:0.5:13.5").size == 27

    @pytest.mark.parametrize("spec", ["0:0.1", "1:0:2", "3:0.1:2", "a:b:c"])
    def test_rejects(self, spec):
        with pytest.raises((ConfigError, ValueError)):
            parse_lambda_grid(spec)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig.build("eigen-find", {})
        assert cfg.params["n"] == 100 and cfg.params["bracket"] == [1.0, 4.0]
        assert cfg.params["K"] == 12 and cfg.params["T"] == 4.0

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            ExperimentConfig.build("eigen-sweep", {"bracket": "1,2"})

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert ExperimentConfig.build("eigen-sweep", {}).threads == 3
        assert ExperimentConfig.build("eigen-sweep", {"threads": 2}).threads == 2

    @pytest.mark.parametrize(
        "experiment, overrides",
        [
            ("poisson-convergence", {"ns": "20,21"}),
            ("poisson-convergence", {"ns": "40,20"}),
            ("eigen-find", {"bracket": "4,1"}),
            ("eigen-find", {"anchor": "0,0,2"}),
            ("eigen-sweep", {"tol": 2.0}),
            ("interp-demo", {"K": -1}),
        ],
    )
    def test_invalid(self, experiment, overrides):
        with pytest.raises(ConfigError):
            ExperimentConfig.build(experiment, overrides)


@pytest.mark.slow
def test_poisson_convergence_cli(tmp_path):
    out = tmp_path / "poisson.csv"
    assert main(["poisson-convergence", "--ns", "20,40", "--out", str(out)]) == EXIT_OK
    rows = _rows(out)
    assert len(rows) == 2 and rows[0]["rate"] == ""
    e0, e1 = float(rows[0]["max_error"]), float(rows[1]["max_error"])
    assert float(rows[1]["rate"]) == pytest.approx(math.log(e0 / e1) / math.log(2.0), rel=1e-12)
    assert rows[0]["nb"] == str(27 ** 3) and rows[1]["n_points"] == "800"
    manifest = json.loads((tmp_path / "poisson.csv.manifest.json").read_text())
    assert manifest["config"]["ns"] == [20, 40]
    assert set(manifest["stages_seconds"]) >= {"poisson_ns20", "poisson_ns40", "total"}
    assert "numpy" in manifest["versions"]


def test_eigen_sweep_cli(tmp_path):
    out = tmp_path / "sweep.csv"
    args = ["eigen-sweep", "--lambda", "0:0.1:14", "--n", "30", "--K", "8", "--out", str(out)]
    assert main(args) == EXIT_OK
    rows = _rows(out)
    assert len(rows) == 141
    assert rows[20]["lambda"] == "2.0"
    assert all(float(r["dnorm"]) > 0 for r in rows)


def test_eigen_find_cli_and_rerun_from_manifest(tmp_path):
    out = tmp_path / "find.csv"
    args = ["eigen-find", "--bracket", "1,4", "--n", "100", "--seed", "7", "--out", str(out)]
    assert main(args) == EXIT_OK
    rows = _rows(out)
    assert len(rows) == 1
    lam = float(rows[0]["lambda_est"])
    assert 1 <= lam <= 4
    assert float(rows[0]["abs_error"]) == pytest.approx(abs(lam - 2.0), abs=1e-15)

    eigen_problem.cache_clear()
    manifest = tmp_path / "find.csv.manifest.json"
    rerun = tmp_path / "again.csv"
    assert main(["eigen-find", "--config", str(manifest), "--out", str(rerun)]) == EXIT_OK
    assert rerun.read_bytes() == out.read_bytes()


def test_interp_demo_cli(tmp_path):
    errors = []
    for n in (60, 240):
        out = tmp_path / f"interp{n}.csv"
        assert main(["interp-demo", "--n", str(n), "--probe", "500", "--out", str(out)]) == EXIT_OK
        (row,) = _rows(out)
        assert row["rank"] == str(2 * n)
        errors.append((float(row["max_value_error"]), float(row["max_surflap_error"])))
    assert errors[1][0] < errors[0][0] / 10
    assert errors[1][1] < errors[0][1] / 10


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 30, "K": 6, "lambda": "0:1:3", "out": str(tmp_path / "a.csv")}))
    assert main(["eigen-sweep", "--config", str(cfg), "--lambda", "0:1:5"]) == EXIT_OK
    assert len(_rows(tmp_path / "a.csv")) == 6


@pytest.mark.parametrize(
    "payload, argv",
    [
        ({"n": 30, "colour": "red"}, ["eigen-sweep"]),
        ({"experiment": "eigen-find"}, ["eigen-sweep"]),
        (None, ["poisson-convergence", "--ns", "20,21"]),
        (None, ["eigen-find", "--bracket", "1"]),
    ],
)
def test_exit_code_for_bad_config(tmp_path, capsys, payload, argv):
    argv = list(argv) + ["--out", str(tmp_path / "x.csv")]
    if payload is not None:
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        argv += ["--config", str(path)]
    assert main(argv) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_exit_code_for_solver_failure(tmp_path, capsys):
    argv = ["eigen-find", "--bracket", "1,8", "--n", "100", "--out", str(tmp_path / "x.csv")]
    assert main(argv) == EXIT_SOLVER
    assert "local minima" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "fourierext.cli", "eigen-sweep", "--n", "10", "--K", "3",
         "--lambda", "0:1:2", "--out", str(out)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == str(out)
    assert np.array([float(r["lambda"]) for r in _rows(out)]).tolist() == [0.0, 1.0, 2.0]
