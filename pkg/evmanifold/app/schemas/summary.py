from pydantic import BaseModel, Field
from typing import Any, Dict, List, Optional

from evmanifold.app.schemas.common import ErrorDetail


class ModelSpec(BaseModel):
    model: str
    params: Dict[str, float]


class GridSpec(BaseModel):
    q_grid: List[float]
    x_grid: List[float]


class GevSummary(BaseModel):
    mu: float
    sigma: float
    xi: float
    n_maxima: int


class MarginSummary(BaseModel):
    name: str
    source: Optional[str] = None
    n_raw: int
    n_used: int
    block: str
    season_enabled: bool
    ks_frechet: float
    gev: Optional[GevSummary] = None


class PosteriorSummary(BaseModel):
    sigma_mean: float
    sigma_lo: float
    sigma_hi: float
    acceptance: float
    draws: int


class SpectralSummary(BaseModel):
    sigma_hat: float
    loglik: float
    fit_sample: str
    n_fit: int
    threshold: float
    radius_threshold: float
    k_exceedances: int
    extremal_coefficient: float
    chi: float
    posterior: Optional[PosteriorSummary] = None


class ScoreEntry(BaseModel):
    model_name: str
    k: int
    n: int
    loglik: float
    aic: float
    bic: float


class RankingEntry(BaseModel):
    rank: int
    model_name: str
    delta_aic: float
    delta_bic: float


class StageReport(BaseModel):
    stage: str
    status: str
    message: Optional[str] = None
    artifacts: List[str] = Field(default_factory=list)


class RunSummary(BaseModel):
    name: str
    version: str
    command: str
    status: str
    config: Dict[str, Any]
    dataset: Optional[str] = None
    margins: List[MarginSummary] = Field(default_factory=list)
    spectral: Optional[SpectralSummary] = None
    model: Optional[ModelSpec] = None
    competitors: List[ModelSpec] = Field(default_factory=list)
    grids: Optional[GridSpec] = None
    scores: List[ScoreEntry] = Field(default_factory=list)
    ranking: List[RankingEntry] = Field(default_factory=list)
    ranking_disagreement: Optional[bool] = None
    stages: List[StageReport] = Field(default_factory=list)
    artifacts: Dict[str, str] = Field(default_factory=dict)
    failed_stage: Optional[str] = None
    error: Optional[ErrorDetail] = None


class SimulationManifest(BaseModel):
    name: str
    version: str
    scenario: Optional[str] = None
    model: ModelSpec
    n: int
    seed: int
    trend_amp: float
    season_amp: float
    freq: str
    start: str
    reduce: Optional[str] = None
    rows: int
    files: Dict[str, str]
