import yaml
from pathlib import Path
from typing import Any, Dict, List, Optional

from evmanifold.app.core.manifold_exceptions import ConfigurationError
from evmanifold.app.models.scenario import ScenarioDefinition
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("scenarios")


MODEL_PARAMS = {
    "logistic": {"alpha"},
    "hr": {"lambda"},
    "ct": {"alpha", "beta"},
    "semiparam": {"sigma"},
}


class ScenarioLoader:
    """Loads and validates scenario definitions from YAML"""

    VALID_FREQS = {"day", "week", "month", "year"}
    VALID_REDUCE = {None, "month", "year"}
    KNOWN_KEYS = {"description", "model", "params", "n", "trend_amp", "season_amp",
                  "seed", "freq", "start", "reduce"}

    def __init__(self):
        self.scenarios: Dict[str, ScenarioDefinition] = {}

    def load_scenarios_file(self, file_path: str) -> Dict[str, ScenarioDefinition]:
        """Load scenarios from a single YAML file"""
        file_path = Path(file_path)

        if not file_path.exists():
            logger.error(f"Scenario file not found: {file_path}")
            raise ConfigurationError(f"Scenario file not found: {file_path}")

        try:
            with open(file_path, 'r') as file:
                data = yaml.safe_load(file)
        except yaml.YAMLError as e:
            logger.error(f"YAML parsing error in {file_path}: {e}")
            raise ConfigurationError(f"Invalid YAML in scenario file {file_path}: {e}")

        if not data or 'scenarios' not in data:
            raise ConfigurationError(f"Scenario file {file_path} must contain a 'scenarios' section")

        scenarios = {}
        for scenario_name, scenario_data in data['scenarios'].items():
            scenario = self._parse_scenario(scenario_name, scenario_data)
            scenarios[scenario_name] = scenario
            self.scenarios[scenario_name] = scenario

        logger.debug(f"Loaded {len(scenarios)} scenarios from {file_path}")
        return scenarios

    def load_directory(self, directory: str) -> Dict[str, ScenarioDefinition]:
        config_dir = Path(directory)
        if not config_dir.exists():
            logger.warning(f"Scenario directory not found: {config_dir}")
            return {}
        for config_file in sorted(config_dir.glob("*.yaml")):
            self.load_scenarios_file(str(config_file))
        return dict(self.scenarios)

    def get_scenario(self, name: str) -> Optional[ScenarioDefinition]:
        return self.scenarios.get(name)

    def list_scenarios(self) -> List[str]:
        return sorted(self.scenarios.keys())

    def _parse_scenario(self, name: str, data: Dict[str, Any]) -> ScenarioDefinition:
        if not isinstance(data, dict):
            raise ConfigurationError(f"Scenario '{name}' must be a dictionary")

        unknown = set(data) - self.KNOWN_KEYS
        if unknown:
            raise ConfigurationError(f"Scenario '{name}' has unknown keys: {sorted(unknown)}")

        model = data.get('model')
        if model not in MODEL_PARAMS:
            raise ConfigurationError(
                f"Scenario '{name}' model must be one of {sorted(MODEL_PARAMS)}, got {model!r}"
            )

        params = data.get('params') or {}
        if not isinstance(params, dict) or set(params) != MODEL_PARAMS[model]:
            raise ConfigurationError(
                f"Scenario '{name}' model '{model}' requires params {sorted(MODEL_PARAMS[model])}"
            )

        freq = data.get('freq', 'week')
        if freq not in self.VALID_FREQS:
            raise ConfigurationError(f"Scenario '{name}' freq must be one of {sorted(self.VALID_FREQS)}")

        reduce = data.get('reduce')
        if reduce not in self.VALID_REDUCE:
            raise ConfigurationError(f"Scenario '{name}' reduce must be month, year or absent")

        try:
            return ScenarioDefinition(
                name=name,
                description=data.get('description', f'Scenario {name}'),
                model=model,
                params={key: float(value) for key, value in params.items()},
                n=int(data.get('n', 2000)),
                trend_amp=float(data.get('trend_amp', 1.0)),
                season_amp=float(data.get('season_amp', 0.5)),
                seed=int(data.get('seed', 7)),
                freq=freq,
                start=str(data.get('start', '1970-01-01')),
                reduce=reduce,
            )
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Scenario '{name}' has an invalid value: {e}")
