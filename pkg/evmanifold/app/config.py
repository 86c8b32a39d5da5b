"""
Configuration management for evmanifold
"""

import json
import yaml
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict, YamlConfigSettingsSource

from evmanifold.app.core.manifold_exceptions import ConfigurationError
from evmanifold.app.core.scenario_loader import ScenarioLoader
from evmanifold.app.models.scenario import ScenarioDefinition
from evmanifold.app.utilities.telemetry import LogDestination, LoggingConfig, LogLevel, get_logger, initialize_logging

PACKAGE_DIR = Path(__file__).resolve().parents[1]
DEFAULTS_FILE = PACKAGE_DIR / "config" / "run_defaults.yaml"
SCENARIO_DIR = PACKAGE_DIR / "config" / "scenarios"


class Settings(BaseSettings):
    """Process-wide settings"""

    app_name: str = "evmanifold"
    app_version: str = "1.0.0"

    # Quadrature size for every spectral integral
    quad_nodes: int = 96

    # Logging
    log_level: str = "WARNING"
    log_format: Literal["json_compact", "json_pretty", "standard", "detailed"] = "json_compact"
    log_file: Optional[str] = None

    scenario_dir: str = str(SCENARIO_DIR)
    defaults_file: str = str(DEFAULTS_FILE)

    model_config = SettingsConfigDict(env_prefix="EVMANIFOLD_", env_file=".env", extra="ignore")

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        return LogLevel.parse(value).name

    def logging_config(self, level: Optional[str] = None, format_type: Optional[str] = None,
                       log_file: Optional[str] = None) -> LoggingConfig:
        """Logging setup from these settings; non-None arguments win"""
        return LoggingConfig(
            level=level or self.log_level,
            format_type=format_type or self.log_format,
            console_destination=LogDestination.STDERR,
            log_file_path=log_file or self.log_file,
        )


settings = Settings()
initialize_logging(settings.logging_config())
logger = get_logger("config")


class RunConfig(BaseSettings):
    """Every tunable of a run; echoed into each run summary"""

    seed: int = 1973
    threshold: float = 0.98
    min_exceedances: int = 10

    # Transformed-stationary windows
    w_years: float = 5.0
    wsn_days: float = 31.0
    smoothing_divisor: int = 2
    extra_smoothing: bool = False
    seasonality: Literal["auto", "on", "off"] = "auto"

    block: Literal["none", "week", "month", "year"] = "none"
    fit_sample: Literal["auto", "exceedances", "all"] = "auto"
    # covariate quantile above which pairs enter the conditional fit
    fit_level: float = 0.9
    as_losses: bool = False

    sigma_lower: float = 0.01
    sigma_upper: float = 100.0

    posterior: bool = False
    mcmc_iters: int = 10000
    mcmc_burnin: int = 4000
    manifold_mode: Literal["plugin", "posterior_mean"] = "plugin"
    posterior_manifold_draws: int = 40

    q_grid: List[float] = Field(default_factory=lambda: [round(0.05 * i, 2) for i in range(1, 20)])
    x_min: float = 0.5
    x_max: float = 100.0
    x_points: int = 40

    rel_tol: float = 1e-10
    max_iter: int = 200
    bracket_growth: float = 4.0

    k_params: int = 1
    table_q_levels: List[float] = Field(default_factory=lambda: [0.75, 0.9, 0.95])
    table_covariate_levels: Optional[List[float]] = None
    table_covariate_probs: List[float] = Field(default_factory=lambda: [0.9, 0.95, 0.98])
    competitors: List[Literal["logistic", "hr", "ct"]] = Field(default_factory=list)

    quad_nodes: int = 96

    model_config = SettingsConfigDict(
        env_prefix="EVMANIFOLD_",
        extra="ignore",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # flags and config file arrive as init kwargs; shipped YAML defaults sit below the environment
        return (init_settings, env_settings, YamlConfigSettingsSource(settings_cls, yaml_file=settings.defaults_file))

    @field_validator("threshold", "fit_level")
    @classmethod
    def _level_range(cls, value: float) -> float:
        if not 0.5 < value < 1.0:
            raise ValueError(f"level must lie in (0.5, 1), got {value}")
        return value

    @field_validator("q_grid", "table_q_levels", "table_covariate_probs")
    @classmethod
    def _probability_grid(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("probability grid must not be empty")
        if any(not 0.0 < q < 1.0 for q in value):
            raise ValueError("probabilities must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("probability grid must be strictly increasing")
        return value

    @field_validator("table_covariate_levels")
    @classmethod
    def _covariate_levels(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and not value:
            raise ValueError("covariate levels must not be empty")
        return value

    @model_validator(mode="after")
    def _consistency(self) -> "RunConfig":
        if not 0.0 < self.x_min < self.x_max:
            raise ValueError("x grid requires 0 < x_min < x_max")
        if self.x_points < 2:
            raise ValueError("x grid needs at least 2 points")
        if not 0.0 < self.sigma_lower < self.sigma_upper:
            raise ValueError("sigma bounds require 0 < lower < upper")
        if self.mcmc_iters <= self.mcmc_burnin or self.mcmc_burnin < 0:
            raise ValueError("mcmc_iters must exceed mcmc_burnin")
        if self.rel_tol <= 0 or self.max_iter < 20 or self.bracket_growth <= 1.0:
            raise ValueError("solver requires rel_tol > 0, max_iter >= 20, bracket_growth > 1")
        if self.k_params < 1:
            raise ValueError("parameter count k must be at least 1")
        if self.quad_nodes < 16:
            raise ValueError("quad_nodes must be at least 16")
        if self.min_exceedances < 1:
            raise ValueError("min_exceedances must be positive")
        return self

    def x_grid(self) -> np.ndarray:
        return np.geomspace(self.x_min, self.x_max, self.x_points)

    def summary_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


class ConfigManager:
    """Manages loading of run configuration files and named scenarios"""

    def __init__(self, scenario_dir: Optional[str] = None):
        self.scenario_dir = scenario_dir or settings.scenario_dir
        self.scenarios: Dict[str, ScenarioDefinition] = {}

    def load_config_file(self, path: str) -> Dict[str, Any]:
        """Load a JSON or YAML run-config file into a plain dict"""
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigurationError(f"Config file not found: {config_path}")

        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                if config_path.suffix.lower() == ".json":
                    data = json.load(f)
                else:
                    data = yaml.safe_load(f)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigurationError(f"Failed to parse config file {config_path}: {e}")

        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {config_path} must hold a mapping")

        unknown = set(data) - set(RunConfig.model_fields)
        if unknown:
            raise ConfigurationError(f"Unknown keys in config file {config_path}: {sorted(unknown)}")

        logger.debug(f"Loaded run config from {config_path}", extra={"keys": sorted(data)})
        return data

    def build_run_config(self, config_file: Optional[str] = None,
                         overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """Merge flags over the config file; env and shipped defaults are filled in by RunConfig"""
        layered: Dict[str, Any] = {}
        if config_file:
            layered.update(self.load_config_file(config_file))
        layered.update({key: value for key, value in (overrides or {}).items() if value is not None})

        try:
            return RunConfig(**layered)
        except PydanticValidationError as e:
            messages = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
            )
            raise ConfigurationError(f"Invalid run configuration: {messages}")

    def load_scenarios(self) -> Dict[str, ScenarioDefinition]:
        loader = ScenarioLoader()
        self.scenarios = loader.load_directory(self.scenario_dir)
        logger.debug(f"Loaded {len(self.scenarios)} scenarios")
        return self.scenarios

    def get_scenario(self, name: str) -> ScenarioDefinition:
        if not self.scenarios:
            self.load_scenarios()
        if name not in self.scenarios:
            raise ConfigurationError(f"Scenario '{name}' not found. Available: {sorted(self.scenarios)}")
        return self.scenarios[name]

    def list_scenarios(self) -> List[str]:
        if not self.scenarios:
            self.load_scenarios()
        return sorted(self.scenarios)


# Global config manager instance
config_manager = ConfigManager()
