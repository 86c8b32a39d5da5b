"""
Command-line surface: outputs, determinism and exit codes
"""

import json

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from evmanifold.app.cli.compare import run_labels
from evmanifold.app.cli.simulate import MANIFEST_FILE, X_FILE, Y_FILE
from evmanifold.app.core.margins import write_series_csv
from evmanifold.app.main import create_app

SMALL_GRID_ARGS = ["--q-grid", "0.25,0.5,0.75", "--x-points", "4"]


def _ok(result):
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture(scope="module")
def analyzed(yearly_sample, tmp_path_factory):
    """Output directory of one analyze run on the bundled sample"""
    out_dir = tmp_path_factory.mktemp("analyzed")
    x_path, y_path = yearly_sample
    _ok(CliRunner().invoke(create_app(), ["analyze", "--x", str(x_path), "--y", str(y_path),
                                          "--out-dir", str(out_dir), *SMALL_GRID_ARGS]))
    return out_dir


class TestSimulate:
    def test_hr_case(self, cli_app, runner, tmp_path):
        _ok(runner.invoke(cli_app, ["simulate", "--model", "hr", "--lambda", "0.1", "--n", "2000", "--seed", "7",
                                    "--out-dir", str(tmp_path)]))
        for name in (X_FILE, Y_FILE):
            frame = pd.read_csv(tmp_path / name)
            assert list(frame.columns) == ["date", "value"]
            assert len(frame) == 2000
        manifest = json.loads((tmp_path / MANIFEST_FILE).read_text(encoding="utf-8"))
        assert manifest["model"] == {"model": "hr", "params": {"lambda": 0.1}}
        assert manifest["rows"] == 2000

    def test_byte_identical_reruns(self, cli_app, runner, tmp_path):
        args = ["simulate", "--model", "logistic", "--alpha", "0.5", "--n", "300", "--seed", "11"]
        _ok(runner.invoke(cli_app, args + ["--out-dir", str(tmp_path / "a")]))
        _ok(runner.invoke(cli_app, args + ["--out-dir", str(tmp_path / "b")]))
        for name in (X_FILE, Y_FILE, MANIFEST_FILE):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_named_scenario_reduced_to_years(self, cli_app, runner, tmp_path):
        _ok(runner.invoke(cli_app, ["simulate", "--scenario", "sample_yearly", "--out-dir", str(tmp_path)]))
        frame = pd.read_csv(tmp_path / X_FILE, parse_dates=["date"])
        assert len(frame) == 50
        assert frame["date"].dt.year.tolist() == list(range(1973, 2023))

    def test_missing_model(self, cli_app, runner, tmp_path):
        assert runner.invoke(cli_app, ["simulate", "--out-dir", str(tmp_path)]).exit_code == 2

    def test_missing_model_parameter(self, cli_app, runner, tmp_path):
        result = runner.invoke(cli_app, ["simulate", "--model", "ct", "--alpha", "0.5", "--out-dir", str(tmp_path)])
        assert result.exit_code == 2

    def test_unknown_scenario(self, cli_app, runner, tmp_path):
        result = runner.invoke(cli_app, ["simulate", "--scenario", "nope", "--out-dir", str(tmp_path)])
        assert result.exit_code == 2


class TestManifold:
    def test_logistic_approximation_columns(self, cli_app, runner, tmp_path):
        out = tmp_path / "approx.csv"
        _ok(runner.invoke(cli_app, ["manifold", "--model", "logistic", "--alpha", "0.9", "--approx",
                                    "--q-grid", "0.5,0.9", "--x-min", "10", "--x-max", "100", "--x-points", "5",
                                    "--out", str(out)]))
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["q", "x", "y_exact", "y_approx", "scale"]
        assert len(frame) == 10
        meta = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
        assert meta["approx"] is True

    def test_default_grid_size(self, cli_app, runner, tmp_path):
        out = tmp_path / "ct.csv"
        _ok(runner.invoke(cli_app, ["manifold", "--model", "ct", "--alpha", "0.5", "--beta", "100",
                                    "--out", str(out)]))
        frame = pd.read_csv(out)
        assert len(frame) == 19 * 40
        assert (frame.groupby("x")["y"].apply(lambda col: np.all(np.diff(col.to_numpy()) > 0))).all()

    def test_empty_q_grid(self, cli_app, runner, tmp_path):
        result = runner.invoke(cli_app, ["manifold", "--model", "hr", "--lambda", "0.1", "--q-grid", "",
                                         "--out", str(tmp_path / "m.csv")])
        assert result.exit_code == 2

    def test_approximation_needs_logistic(self, cli_app, runner, tmp_path):
        result = runner.invoke(cli_app, ["manifold", "--model", "hr", "--lambda", "0.1", "--approx",
                                         "--out", str(tmp_path / "m.csv")])
        assert result.exit_code == 2

    def test_no_model_source(self, cli_app, runner, tmp_path):
        assert runner.invoke(cli_app, ["manifold", "--out", str(tmp_path / "m.csv")]).exit_code == 2

    def test_from_run_summary(self, cli_app, runner, analyzed, tmp_path):
        out = tmp_path / "from_summary.csv"
        _ok(runner.invoke(cli_app, ["manifold", "--summary", str(analyzed / "summary.json"), "--out", str(out)]))
        frame = pd.read_csv(out)
        assert len(frame) == 3 * 4
        meta = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
        assert meta["model"] == "semiparam"


class TestStationarize:
    def test_outputs(self, cli_app, runner, make_series, rng, tmp_path):
        t = np.arange(5000.0)
        series = make_series(0.002 * t + np.sin(2 * np.pi * t / 365.25) + rng.gumbel(size=t.size))
        source = write_series_csv(tmp_path / "series.csv", series)
        out_dir = tmp_path / "out"
        _ok(runner.invoke(cli_app, ["stationarize", "--input", str(source), "--out-dir", str(out_dir)]))
        decomposition = pd.read_csv(out_dir / "decomposition.csv")
        assert len(decomposition) == 5000
        assert "stationarized" in decomposition.columns
        assert len(pd.read_csv(out_dir / "gev_timevarying.csv")) == 5000
        fit = json.loads((out_dir / "gev_fit.json").read_text(encoding="utf-8"))
        assert fit["block"] == "year"
        assert fit["season_enabled"] is True
        assert set(fit["gev"]) == {"mu", "sigma", "xi"}

    def test_missing_input(self, cli_app, runner, tmp_path):
        result = runner.invoke(cli_app, ["stationarize", "--input", str(tmp_path / "absent.csv"),
                                         "--out-dir", str(tmp_path)])
        assert result.exit_code == 3


class TestAnalyze:
    def test_artifacts(self, analyzed):
        for name in ("decomposition_x.csv", "density_band.csv", "manifold.csv", "quantile_table.csv",
                     "quantile_table.txt", "scores.csv", "summary.json"):
            assert (analyzed / name).exists(), name
        summary = json.loads((analyzed / "summary.json").read_text(encoding="utf-8"))
        assert summary["status"] == "completed"
        assert summary["command"] == "analyze"
        assert summary["grids"]["q_grid"] == [0.25, 0.5, 0.75]

    def test_deterministic(self, cli_app, runner, yearly_sample, analyzed, tmp_path):
        x_path, y_path = yearly_sample
        _ok(runner.invoke(cli_app, ["analyze", "--x", str(x_path), "--y", str(y_path), "--out-dir", str(tmp_path),
                                    *SMALL_GRID_ARGS]))
        for name in ("summary.json", "manifold.csv", "density_band.csv", "quantile_table.csv"):
            assert (tmp_path / name).read_bytes() == (analyzed / name).read_bytes(), name

    def test_no_seasonality_flag(self, cli_app, runner, yearly_sample, tmp_path):
        x_path, y_path = yearly_sample
        _ok(runner.invoke(cli_app, ["analyze", "--x", str(x_path), "--y", str(y_path), "--out-dir", str(tmp_path),
                                    "--no-seasonality", *SMALL_GRID_ARGS]))
        summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert summary["config"]["seasonality"] == "off"
        assert not any(margin["season_enabled"] for margin in summary["margins"])

    def test_missing_input(self, cli_app, runner, yearly_sample, tmp_path):
        result = runner.invoke(cli_app, ["analyze", "--x", str(tmp_path / "absent.csv"),
                                         "--y", str(yearly_sample[1]), "--out-dir", str(tmp_path)])
        assert result.exit_code == 3
        assert (tmp_path / "FAILED").exists()

    def test_config_file_layer(self, cli_app, runner, yearly_sample, tmp_path):
        config = tmp_path / "run.yaml"
        config.write_text("q_grid: [0.5]\nx_points: 3\n", encoding="utf-8")
        x_path, y_path = yearly_sample
        _ok(runner.invoke(cli_app, ["--config", str(config), "analyze", "--x", str(x_path), "--y", str(y_path),
                                    "--out-dir", str(tmp_path / "out")]))
        assert len(pd.read_csv(tmp_path / "out" / "manifold.csv")) == 2 * 3


class TestFitAndCompare:
    def _fit(self, runner, cli_app, x_path, y_path, out_dir, *extra):
        _ok(runner.invoke(cli_app, ["fit", "--x", str(x_path), "--y", str(y_path), "--out-dir", str(out_dir),
                                    *extra]))
        return out_dir / "summary.json"

    def test_compare_same_data(self, cli_app, runner, yearly_sample, tmp_path):
        first = self._fit(runner, cli_app, *yearly_sample, tmp_path / "plain")
        second = self._fit(runner, cli_app, *yearly_sample, tmp_path / "rivals", "--competitors", "logistic")
        result = _ok(runner.invoke(cli_app, ["compare", "--summary", str(first), "--summary", str(second),
                                             "--out-dir", str(tmp_path)]))
        assert "delta_aic" in result.stdout
        table = pd.read_csv(tmp_path / "comparison.csv")
        assert len(table) == 3
        assert table["model"].str.startswith(("plain:", "rivals:")).all()
        assert table["delta_aic"].iloc[0] == 0.0

    def test_compare_different_data(self, cli_app, runner, yearly_sample, tmp_path):
        x_path, y_path = yearly_sample
        first = self._fit(runner, cli_app, x_path, y_path, tmp_path / "a")
        swapped = self._fit(runner, cli_app, y_path, x_path, tmp_path / "b")
        result = runner.invoke(cli_app, ["compare", "--summary", str(first), "--summary", str(swapped)])
        assert result.exit_code == 3

    def test_compare_single_summary(self, cli_app, runner, yearly_sample, tmp_path):
        only = self._fit(runner, cli_app, *yearly_sample, tmp_path / "only")
        assert runner.invoke(cli_app, ["compare", "--summary", str(only)]).exit_code == 2

    def test_fit_reports_sigma(self, cli_app, runner, yearly_sample, tmp_path):
        x_path, y_path = yearly_sample
        result = _ok(runner.invoke(cli_app, ["fit", "--x", str(x_path), "--y", str(y_path),
                                             "--out-dir", str(tmp_path)]))
        payload = json.loads(result.stdout)
        assert payload["status"] == "completed"
        assert payload["sigma_hat"] > 0
        assert not (tmp_path / "manifold.csv").exists()

    def test_fit_level_sets_conditional_sample(self, cli_app, runner, yearly_sample, tmp_path):
        x_path, y_path = yearly_sample
        _ok(runner.invoke(cli_app, ["fit", "--x", str(x_path), "--y", str(y_path), "--out-dir", str(tmp_path),
                                    "--fit-sample", "exceedances", "--threshold", "0.6", "--fit-level", "0.8"]))
        summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert summary["config"]["fit_level"] == 0.8
        assert summary["spectral"]["fit_sample"] == "exceedances"
        assert summary["spectral"]["n_fit"] == 10

    def test_labels_name_run_directories(self, tmp_path):
        paths = [tmp_path / "plain" / "summary.json", tmp_path / "rivals" / "summary.json"]
        assert run_labels(paths) == ["plain", "rivals"]

    def test_labels_fall_back_to_full_paths(self, tmp_path):
        paths = [tmp_path / "a" / "run" / "summary.json", tmp_path / "b" / "run" / "summary.json"]
        labels = run_labels(paths)
        assert labels[0] != labels[1]
        assert labels[0].endswith("run") and labels[1].endswith("run")


class TestRoot:
    def test_bad_log_level(self, cli_app, runner, tmp_path):
        result = runner.invoke(cli_app, ["--log-level", "LOUD", "manifold", "--model", "logistic", "--alpha", "0.5",
                                         "--out", str(tmp_path / "m.csv")])
        assert result.exit_code == 2

    def test_log_file_and_format(self, cli_app, runner, tmp_path, restore_logging):
        log_path = tmp_path / "logs" / "run.log"
        _ok(runner.invoke(cli_app, ["--log-level", "INFO", "--log-format", "standard", "--log-file", str(log_path),
                                    "simulate", "--model", "logistic", "--alpha", "0.5", "--n", "120",
                                    "--out-dir", str(tmp_path / "sim")]))
        text = log_path.read_text(encoding="utf-8")
        assert " - evmanifold.cli.simulate - INFO - Simulation written" in text

    def test_bad_log_format(self, cli_app, runner, tmp_path, restore_logging):
        result = runner.invoke(cli_app, ["--log-format", "xml", "manifold", "--model", "logistic", "--alpha", "0.5",
                                         "--out", str(tmp_path / "m.csv")])
        assert result.exit_code == 2

    def test_help_lists_commands(self, cli_app, runner):
        result = _ok(runner.invoke(cli_app, ["--help"]))
        for command in ("simulate", "stationarize", "fit", "manifold", "compare", "analyze"):
            assert command in result.stdout
