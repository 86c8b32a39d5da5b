from dataclasses import dataclass, field
from typing import Dict, Optional


@dataclass(frozen=True)
class ScenarioDefinition:
    """Named simulation scenario - ready for simulate_scenario"""
    name: str
    description: str
    model: str  # "logistic", "hr", "ct", "semiparam"
    params: Dict[str, float] = field(default_factory=dict)
    n: int = 2000
    trend_amp: float = 1.0
    season_amp: float = 0.5
    seed: int = 7
    freq: str = "week"
    start: str = "1970-01-01"
    reduce: Optional[str] = None  # componentwise block maxima after simulation
