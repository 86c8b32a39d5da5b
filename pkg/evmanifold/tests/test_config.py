"""
Run configuration layering, scenarios, logging setup and error reporting
"""

import json
import logging

import pytest
from pydantic import ValidationError as PydanticValidationError

from evmanifold.app.config import ConfigManager, RunConfig, Settings, config_manager, settings
from evmanifold.app.core.exceptions import build_error_detail, exit_code_for, report_error
from evmanifold.app.core.manifold_exceptions import (
    ConfigurationError, DataError, DomainError, InsufficientExceedancesError, SolverError, ValidationError
)
from evmanifold.app.utilities.logging_config import LogLevel
from evmanifold.app.utilities.telemetry import get_logger, initialize_logging


class TestRunConfig:
    def test_shipped_defaults(self):
        cfg = config_manager.build_run_config()
        assert cfg.seed == 1973
        assert cfg.threshold == 0.98
        assert len(cfg.q_grid) == 19
        assert cfg.q_grid[0] == 0.05 and cfg.q_grid[-1] == 0.95
        assert cfg.x_grid()[0] == pytest.approx(0.5)
        assert cfg.x_grid()[-1] == pytest.approx(100.0)
        assert cfg.competitors == []
        assert cfg.fit_level == 0.9

    def test_flags_override_and_none_is_ignored(self):
        cfg = config_manager.build_run_config(overrides={"seed": 5, "threshold": None})
        assert cfg.seed == 5
        assert cfg.threshold == 0.98

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("seed: 11\nx_points: 7\nblock: year\n", encoding="utf-8")
        cfg = config_manager.build_run_config(str(path), {"x_points": 9})
        assert (cfg.seed, cfg.x_points, cfg.block) == (11, 9, "year")

    def test_json_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"competitors": ["hr", "ct"], "posterior": True}), encoding="utf-8")
        cfg = config_manager.build_run_config(str(path))
        assert cfg.competitors == ["hr", "ct"]
        assert cfg.posterior

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("", encoding="utf-8")
        assert config_manager.build_run_config(str(path)).seed == 1973

    def test_unknown_keys(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("seed: 1\nthresold: 0.9\n", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="thresold"):
            config_manager.build_run_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            config_manager.build_run_config(str(tmp_path / "absent.yaml"))

    def test_environment_layer(self, monkeypatch):
        monkeypatch.setenv("EVMANIFOLD_QUAD_NODES", "48")
        assert RunConfig().quad_nodes == 48
        assert config_manager.build_run_config(overrides={"quad_nodes": 64}).quad_nodes == 64

    @pytest.mark.parametrize("overrides", [
        {"threshold": 0.3},
        {"threshold": 1.0},
        {"fit_level": 0.3},
        {"fit_level": 1.0},
        {"q_grid": []},
        {"q_grid": [0.5, 0.2]},
        {"x_min": 10.0, "x_max": 1.0},
        {"mcmc_iters": 100, "mcmc_burnin": 100},
        {"seasonality": "sometimes"},
        {"competitors": ["semiparam"]},
        {"quad_nodes": 8},
    ])
    def test_invalid_values(self, overrides):
        with pytest.raises(ConfigurationError):
            config_manager.build_run_config(overrides=overrides)

    def test_defaults_file_comes_from_settings(self, tmp_path, monkeypatch):
        path = tmp_path / "site_defaults.yaml"
        path.write_text("seed: 77\nfit_level: 0.8\n", encoding="utf-8")
        monkeypatch.setattr(settings, "defaults_file", str(path))
        cfg = RunConfig()
        assert (cfg.seed, cfg.fit_level) == (77, 0.8)
        assert cfg.threshold == 0.98

    def test_summary_dict_is_json_ready(self):
        data = config_manager.build_run_config().summary_dict()
        assert json.loads(json.dumps(data))["seed"] == 1973


class TestScenarios:
    def test_bundled_scenarios(self):
        assert {"case1_hr", "case2_logistic", "case3_ct", "sample_yearly"} <= set(config_manager.list_scenarios())

    def test_case_definition(self):
        case = config_manager.get_scenario("case1_hr")
        assert (case.model, case.params, case.n, case.freq) == ("hr", {"lambda": 0.1}, 2000, "week")

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            config_manager.get_scenario("case9")

    def test_custom_directory(self, tmp_path):
        (tmp_path / "mine.yaml").write_text(
            "scenarios:\n  tiny:\n    model: logistic\n    params:\n      alpha: 0.3\n    n: 200\n",
            encoding="utf-8",
        )
        manager = ConfigManager(str(tmp_path))
        assert manager.list_scenarios() == ["tiny"]
        assert manager.get_scenario("tiny").params == {"alpha": 0.3}


class TestLogLevel:
    def test_parse(self):
        assert LogLevel.parse("debug") == LogLevel.DEBUG
        assert LogLevel.parse(" Warning ") == LogLevel.WARNING

    def test_unknown(self):
        with pytest.raises(ValueError):
            LogLevel.parse("loud")


class TestLoggingSettings:
    def test_environment_sets_level(self, monkeypatch, restore_logging):
        monkeypatch.setenv("EVMANIFOLD_LOG_LEVEL", "debug")
        local = Settings()
        assert local.log_level == "DEBUG"
        initialize_logging(local.logging_config())
        assert logging.getLogger("evmanifold").level == logging.DEBUG

    def test_unknown_level_rejected(self, monkeypatch):
        monkeypatch.setenv("EVMANIFOLD_LOG_LEVEL", "loud")
        with pytest.raises(PydanticValidationError):
            Settings()

    def test_pretty_json_on_stderr(self, capsys, restore_logging):
        initialize_logging(settings.logging_config(level="INFO", format_type="json_pretty"))
        get_logger("spectral").info("grid ready", extra={"nodes": 96})
        err = capsys.readouterr().err
        record = json.loads(err)
        assert record["logger"] == "evmanifold.spectral"
        assert record["extra"] == {"nodes": 96}
        assert "\n  " in err

    def test_file_handler(self, tmp_path, restore_logging):
        log_path = tmp_path / "logs" / "run.log"
        initialize_logging(settings.logging_config(level="INFO", format_type="detailed", log_file=str(log_path)))
        get_logger("pipeline").warning("stage slow")
        line = log_path.read_text(encoding="utf-8").strip()
        assert " - evmanifold.pipeline - WARNING - " in line
        assert line.endswith(" - stage slow")
        assert "test_config:test_file_handler" in line


class TestErrorReporting:
    @pytest.mark.parametrize("exc, code", [
        (ValidationError("bad"), 2),
        (DomainError("outside"), 2),
        (ConfigurationError("cfg"), 2),
        (DataError("data"), 3),
        (InsufficientExceedancesError("few"), 3),
        (FileNotFoundError("gone"), 3),
        (SolverError("stuck"), 4),
        (FloatingPointError("overflow"), 4),
    ])
    def test_exit_codes(self, exc, code):
        assert exit_code_for(exc) == code

    def test_detail_carries_location(self):
        detail = build_error_detail(SolverError("stuck", stage="build_manifold", point=(0.5, 2.0), cell=(0, 1)))
        assert detail.stage == "build_manifold"
        assert detail.point == [0.5, 2.0]
        assert detail.cell == [0, 1]
        assert detail.exit_code == 4

    def test_report_writes_json_to_stderr(self, capsys):
        assert report_error(DataError("series has a gap", index=4)) == 3
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert payload["detail"]["error_type"] == "DataError"
        assert payload["detail"]["index"] == 4
