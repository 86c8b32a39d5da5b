"""
End-to-end analysis: stationarize both margins, take block maxima if asked,
move to unit Frechet margins, fit the spectral sigma, build the regression
manifold and score the fit. Each stage is recorded; a failing stage leaves
the artifacts written so far, a summary marked failed and a FAILED marker.
"""

import hashlib
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from evmanifold.app.config import RunConfig, settings
from evmanifold.app.core.evmodels import (
    EvModel, SemiparamLn, density_crosscheck, extremal_coefficient, fit_family
)
from evmanifold.app.core.exceptions import build_error_detail
from evmanifold.app.core.manifold import (
    QuantileTable, RegressionManifold, SolverConfig, build_manifold, covariate_levels_from_probs,
    manifold_to_original_scale, posterior_mean_manifold, predict_quantile_table
)
from evmanifold.app.core.manifold_exceptions import ConfigurationError, DataError, ManifoldError
from evmanifold.app.core.margins import (
    FrechetSample, GevParams, UniSeries, block_maxima, fit_gev, ks_distance_to_frechet,
    read_series_csv, to_losses, to_unit_frechet
)
from evmanifold.app.core.selection import ModelScore, Ranking, compare, score
from evmanifold.app.core.spectral import (
    GaussQuadRule, LnSpectral, PosteriorBand, PseudoAngles, extract_pseudo_angles,
    fit_sigma_mle, ln_density, select_covariate_exceedances, sigma_posterior_band
)
from evmanifold.app.core.tstationary import (
    YEARLY_SPACING_DAYS, TimeVaryingGev, TsConfig, TsDecomposition, destationarize_gev, stationarize
)
from evmanifold.app.schemas.summary import (
    MarginSummary, RunSummary, SpectralSummary, StageReport
)
from evmanifold.app.utilities.converters import (
    convert_band_to_summary, convert_gev_to_summary, convert_manifold_to_grid, convert_model_to_spec,
    convert_ranking_to_entries, convert_score_to_entry
)
from evmanifold.app.utilities.io import atomic_write_text, write_frame, write_json
from evmanifold.app.utilities.random_streams import stream
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("pipeline")

SEASONALITY_MODES = {"auto": None, "on": True, "off": False}
BAND_GRID = np.linspace(0.005, 0.995, 199)
FAILURE_MARKER = "FAILED"
SUMMARY_FILE = "summary.json"


class StageStatus(Enum):
    COMPLETED = "completed"
    FAILED = "failed"
    SKIPPED = "skipped"


Stage = Tuple[str, Callable[[], Optional[StageStatus]]]


@dataclass
class StageResult:
    """Outcome of one pipeline stage"""
    stage: str
    status: StageStatus
    message: Optional[str] = None
    artifacts: List[str] = field(default_factory=list)
    elapsed_ms: int = 0  # logged only; summaries stay byte-deterministic


@dataclass
class MarginState:
    name: str
    source: Optional[str]
    raw: UniSeries
    stationary: Optional[UniSeries] = None
    decomposition: Optional[TsDecomposition] = None
    sample: Optional[UniSeries] = None  # stationarized values entering the Frechet transform
    original: Optional[np.ndarray] = None  # the same sample on the data scale
    gev: Optional[GevParams] = None
    gev_timevarying: Optional[TimeVaryingGev] = None
    frechet: Optional[FrechetSample] = None
    ks: Optional[float] = None


@dataclass
class PipelineState:
    margins: List[MarginState] = field(default_factory=list)
    blocked: bool = False
    fit_sample: str = "exceedances"
    angles: Optional[PseudoAngles] = None
    fit_x: Optional[FrechetSample] = None
    fit_y: Optional[FrechetSample] = None
    sigma_hat: Optional[float] = None
    loglik: Optional[float] = None
    model: Optional[SemiparamLn] = None
    band: Optional[PosteriorBand] = None
    manifold: Optional[RegressionManifold] = None
    original_manifold: Optional[RegressionManifold] = None
    table: Optional[QuantileTable] = None
    scores: List[ModelScore] = field(default_factory=list)
    competitors: List[EvModel] = field(default_factory=list)
    ranking: Optional[Ranking] = None
    stages: List[StageResult] = field(default_factory=list)
    artifacts: Dict[str, str] = field(default_factory=dict)


def align_margins(x: UniSeries, y: UniSeries) -> Tuple[UniSeries, UniSeries]:
    """Keep the dates both margins share"""
    common, ix, iy = np.intersect1d(x.times, y.times, assume_unique=True, return_indices=True)
    if common.size < 2:
        raise DataError(f"margins share {common.size} dates; at least 2 are needed", stage="load")
    if common.size < max(len(x), len(y)):
        logger.info("Dropping unmatched dates", extra={"kept": int(common.size), "x": len(x), "y": len(y)})
    return UniSeries(x.times[ix], x.values[ix]), UniSeries(y.times[iy], y.values[iy])


def dataset_fingerprint(x: FrechetSample, y: FrechetSample) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(x.values, dtype="<f8").tobytes())
    digest.update(np.ascontiguousarray(y.values, dtype="<f8").tobytes())
    return digest.hexdigest()


def solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(rel_tol=cfg.rel_tol, max_iter=cfg.max_iter, bracket_growth=cfg.bracket_growth)


def ts_config(cfg: RunConfig) -> TsConfig:
    return TsConfig(
        w=cfg.w_years,
        wsn=cfg.wsn_days,
        l=cfg.smoothing_divisor,
        extra_smoothing=cfg.extra_smoothing,
        season_enabled=SEASONALITY_MODES[cfg.seasonality],
    )


class AnalysisPipeline:
    """Runs the analysis stages in order and writes every artifact into ``out_dir``"""

    def __init__(self, cfg: RunConfig, out_dir: Union[str, Path], command: str = "analyze",
                 rule: Optional[GaussQuadRule] = None):
        if cfg.manifold_mode == "posterior_mean" and not cfg.posterior:
            raise ConfigurationError("manifold mode 'posterior_mean' needs the posterior sampler (--posterior)")
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.command = command
        self.rule = rule or GaussQuadRule.hermite(cfg.quad_nodes)
        self.solver = solver_config(cfg)
        self.state = PipelineState()

    # --- entry points --------------------------------------------------------

    def run(self, x_path: Union[str, Path], y_path: Union[str, Path], with_manifold: bool = True) -> RunSummary:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._clear_marker()
        stages: List[Stage] = [
            ("load", lambda: self._load(str(x_path), str(y_path))),
        ]
        return self._execute(stages + self._analysis_stages(with_manifold))

    def run_series(self, x: UniSeries, y: UniSeries, with_manifold: bool = True) -> RunSummary:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._clear_marker()
        stages: List[Stage] = [
            ("load", lambda: self._accept(x, y)),
        ]
        return self._execute(stages + self._analysis_stages(with_manifold))

    def _analysis_stages(self, with_manifold: bool) -> List[Stage]:
        stages = [
            ("stationarize", self._stationarize),
            ("block_maxima", self._block_maxima),
            ("margin_gev", self._margin_gev),
            ("frechet", self._frechet),
            ("pseudo_angles", self._pseudo_angles),
            ("fit_sigma", self._fit_sigma),
            ("density_band", self._density_band),
        ]
        if with_manifold:
            stages += [
                ("manifold", self._manifold),
                ("quantile_table", self._quantile_table),
            ]
        stages.append(("score", self._score))
        return stages

    def _execute(self, stages: List[Stage]) -> RunSummary:
        logger.info(f"Starting {self.command} run", extra={"out_dir": str(self.out_dir), "seed": self.cfg.seed})
        for name, action in stages:
            start = time.perf_counter()
            before = set(self.state.artifacts)
            try:
                outcome = action()
            except Exception as e:
                elapsed = int((time.perf_counter() - start) * 1000)
                logger.error(f"Stage {name} failed: {e}", extra={"stage": name, "elapsed_ms": elapsed})
                self.state.stages.append(StageResult(name, StageStatus.FAILED, str(e), elapsed_ms=elapsed))
                if isinstance(e, ManifoldError) and e.stage is None:
                    e.stage = name
                self._write_failure(name, e)
                raise
            elapsed = int((time.perf_counter() - start) * 1000)
            produced = sorted(set(self.state.artifacts) - before)
            status = outcome or StageStatus.COMPLETED
            self.state.stages.append(StageResult(name, status, artifacts=produced, elapsed_ms=elapsed))
            logger.debug(f"Stage {name} {status.value}", extra={"stage": name, "elapsed_ms": elapsed})

        summary = self._write_summary("completed")
        logger.info(f"{self.command} run completed", extra={"out_dir": str(self.out_dir)})
        return summary

    # --- stages --------------------------------------------------------------

    def _accept(self, x: UniSeries, y: UniSeries, sources: Tuple[Optional[str], Optional[str]] = (None, None)):
        if self.cfg.as_losses:
            x, y = to_losses(x), to_losses(y)
        x, y = align_margins(x, y)
        self.state.margins = [MarginState("x", sources[0], x), MarginState("y", sources[1], y)]

    def _load(self, x_path: str, y_path: str):
        self._accept(read_series_csv(x_path), read_series_csv(y_path), (x_path, y_path))

    def _stationarize(self):
        ts = ts_config(self.cfg)
        for margin in self.state.margins:
            margin.stationary, margin.decomposition = stationarize(margin.raw, ts)
            self._write(f"decomposition_{margin.name}.csv", f"decomposition_{margin.name}",
                        lambda p, d=margin.decomposition: write_frame(p, d.to_frame()))

    def _block_maxima(self):
        x, y = self.state.margins
        if self.cfg.block == "none":
            for margin in self.state.margins:
                margin.sample = margin.stationary
                margin.original = margin.raw.values
            return StageStatus.SKIPPED

        sx, sy = align_margins(block_maxima(x.stationary, self.cfg.block), block_maxima(y.stationary, self.cfg.block))
        ox, oy = align_margins(block_maxima(x.raw, self.cfg.block), block_maxima(y.raw, self.cfg.block))
        x.sample, y.sample = sx, sy
        x.original, y.original = ox.values, oy.values
        self.state.blocked = True
        logger.info("Componentwise block maxima taken", extra={"block": self.cfg.block, "n": len(sx)})

    def _yearly(self) -> bool:
        return self.state.margins[0].sample.median_spacing_days() >= YEARLY_SPACING_DAYS

    def _margin_gev(self):
        if not (self.state.blocked or self._yearly()):
            return StageStatus.SKIPPED
        for margin in self.state.margins:
            margin.gev = fit_gev(margin.sample.values)
            margin.gev_timevarying = destationarize_gev(margin.gev, margin.decomposition)
            self._write(f"gev_timevarying_{margin.name}.csv", f"gev_timevarying_{margin.name}",
                        lambda p, g=margin.gev_timevarying: write_frame(p, g.to_frame()))

    def _frechet(self):
        for margin in self.state.margins:
            margin.frechet = to_unit_frechet(margin.sample.values)
            margin.ks = ks_distance_to_frechet(margin.frechet.values)
            logger.debug("Unit Frechet margin", extra={"margin": margin.name, "ks": margin.ks})

    def _pseudo_angles(self):
        cfg = self.cfg
        mode = cfg.fit_sample
        if mode == "auto":
            mode = "all" if (self.state.blocked or self._yearly()) else "exceedances"
        self.state.fit_sample = mode

        fx, fy = self.state.margins[0].frechet, self.state.margins[1].frechet
        angles = extract_pseudo_angles(
            fx, fy, cfg.threshold,
            min_exceedances=cfg.min_exceedances if mode == "exceedances" else None,
        )
        self.state.angles = angles
        self._write("pseudo_angles.csv", "pseudo_angles", lambda p: write_frame(p, angles.to_frame()))

        if mode == "exceedances":
            self.state.fit_x, self.state.fit_y = select_covariate_exceedances(
                fx, fy, cfg.fit_level, min_exceedances=cfg.min_exceedances
            )
        else:
            self.state.fit_x, self.state.fit_y = fx, fy

    def _fit_sigma(self):
        s = self.state
        s.sigma_hat, s.loglik = fit_sigma_mle(s.fit_x, s.fit_y, (self.cfg.sigma_lower, self.cfg.sigma_upper),
                                              self.rule)
        s.model = SemiparamLn(LnSpectral(s.sigma_hat), self.rule)
        density_crosscheck(s.model, 1.0, 2.0)

    def _density_band(self):
        s = self.state
        cfg = self.cfg
        plugin = ln_density(BAND_GRID, LnSpectral(s.sigma_hat))
        if cfg.posterior:
            s.band = sigma_posterior_band(
                s.fit_x, s.fit_y, cfg.mcmc_iters, cfg.mcmc_burnin,
                rng=stream(cfg.seed, "posterior"), sigma_start=s.sigma_hat,
                bounds=(cfg.sigma_lower, cfg.sigma_upper), w_grid=BAND_GRID, rule=self.rule,
            )
            frame = s.band.to_frame()
        else:
            # without the sampler the band collapses onto the plug-in density
            frame = pd.DataFrame({"w": BAND_GRID, "h_mean": plugin, "h_lo": plugin, "h_hi": plugin})
        frame.insert(1, "h_plugin", plugin)
        self._write("density_band.csv", "density_band", lambda p: write_frame(p, frame))

    def _manifold(self):
        s = self.state
        cfg = self.cfg
        x_margin, y_margin = s.margins
        if cfg.manifold_mode == "posterior_mean":
            s.manifold = posterior_mean_manifold(s.band.draws, cfg.q_grid, cfg.x_grid(), self.solver,
                                                 cfg.posterior_manifold_draws, self.rule)
        else:
            s.manifold = build_manifold(s.model, cfg.q_grid, cfg.x_grid(), self.solver)
        s.original_manifold = manifold_to_original_scale(s.manifold, x_margin.original, y_margin.original)

        frame = pd.concat([s.manifold.to_frame(), s.original_manifold.to_frame()], ignore_index=True)
        self._write("manifold.csv", "manifold", lambda p: write_frame(p, frame))
        meta = {
            "mode": cfg.manifold_mode,
            "frechet": s.manifold.metadata(self.solver),
            "original": s.original_manifold.metadata(),
        }
        self._write("manifold.json", "manifold_metadata", lambda p: write_json(p, meta))

    def _quantile_table(self):
        s = self.state
        cfg = self.cfg
        x_data, y_data = s.margins[0].original, s.margins[1].original
        levels = cfg.table_covariate_levels
        if levels is None:
            levels = covariate_levels_from_probs(cfg.table_covariate_probs, x_data)
        s.table = predict_quantile_table(
            s.model, levels, cfg.table_q_levels, self.solver,
            x_data=x_data, y_data=y_data,
            draws=s.band.draws if s.band is not None else None,
            n_draws=cfg.posterior_manifold_draws,
        )
        self._write("quantile_table.csv", "quantile_table", lambda p: write_frame(p, s.table.to_frame()))
        self._write("quantile_table.txt", "quantile_table_text", lambda p: atomic_write_text(p, s.table.render()))

    def _score(self):
        s = self.state
        s.scores = [score(s.model, s.fit_x, s.fit_y, self.cfg.k_params)]
        for kind in self.cfg.competitors:
            fitted, _ = fit_family(kind, s.fit_x, s.fit_y)
            s.competitors.append(fitted)
            s.scores.append(score(fitted, s.fit_x, s.fit_y, fitted.n_params))

        if len(s.scores) > 1:
            s.ranking = compare(s.scores)
            frame = s.ranking.to_frame()
            text = s.ranking.render()
        else:
            frame = pd.DataFrame([s.scores[0].as_dict()])
            text = frame.to_string(index=False) + "\n"
        self._write("scores.csv", "scores", lambda p: write_frame(p, frame))
        self._write("scores.txt", "scores_text", lambda p: atomic_write_text(p, text))

    # --- outputs -------------------------------------------------------------

    def _write(self, filename: str, key: str, writer: Callable[[Path], Path]) -> None:
        writer(self.out_dir / filename)
        self.state.artifacts[key] = filename

    def _write_summary(self, status: str, failed_stage: Optional[str] = None,
                       exc: Optional[Exception] = None) -> RunSummary:
        # listed among its own artifacts
        self.state.artifacts["summary"] = SUMMARY_FILE
        summary = self.build_summary(status, failed_stage=failed_stage, exc=exc)
        write_json(self.out_dir / SUMMARY_FILE, summary.model_dump(mode="json"))
        return summary

    def _clear_marker(self) -> None:
        marker = self.out_dir / FAILURE_MARKER
        if marker.exists():
            marker.unlink()

    def _write_failure(self, stage: str, exc: Exception) -> None:
        try:
            self._write_summary("failed", failed_stage=stage, exc=exc)
        except Exception as e:  # the original failure is what gets reported
            logger.error(f"Could not write the failure summary: {e}")
        atomic_write_text(self.out_dir / FAILURE_MARKER, f"stage: {stage}\nerror: {type(exc).__name__}: {exc}\n")

    def build_summary(self, status: str, failed_stage: Optional[str] = None,
                      exc: Optional[Exception] = None) -> RunSummary:
        s = self.state
        margins = []
        for m in s.margins:
            if m.frechet is None:
                continue
            margins.append(MarginSummary(
                name=m.name,
                source=m.source,
                n_raw=len(m.raw),
                n_used=len(m.frechet),
                block=self.cfg.block,
                season_enabled=bool(m.decomposition.season_enabled),
                ks_frechet=float(m.ks),
                gev=convert_gev_to_summary(m.gev, len(m.sample)) if m.gev is not None else None,
            ))

        spectral = None
        if s.sigma_hat is not None:
            v11 = extremal_coefficient(s.model)
            spectral = SpectralSummary(
                sigma_hat=s.sigma_hat,
                loglik=s.loglik,
                fit_sample=s.fit_sample,
                n_fit=len(s.fit_x),
                threshold=self.cfg.threshold,
                radius_threshold=s.angles.u,
                k_exceedances=s.angles.k,
                extremal_coefficient=v11,
                chi=2.0 - v11,
                posterior=convert_band_to_summary(s.band) if s.band is not None else None,
            )

        return RunSummary(
            name=settings.app_name,
            version=settings.app_version,
            command=self.command,
            status=status,
            config=self.cfg.summary_dict(),
            dataset=dataset_fingerprint(s.fit_x, s.fit_y) if s.fit_x is not None else None,
            margins=margins,
            spectral=spectral,
            model=convert_model_to_spec(s.model) if s.model is not None else None,
            competitors=[convert_model_to_spec(m) for m in s.competitors],
            grids=convert_manifold_to_grid(s.manifold) if s.manifold is not None else None,
            scores=[convert_score_to_entry(sc) for sc in s.scores],
            ranking=convert_ranking_to_entries(s.ranking) if s.ranking is not None else [],
            ranking_disagreement=s.ranking.disagreement if s.ranking is not None else None,
            stages=[StageReport(stage=r.stage, status=r.status.value, message=r.message, artifacts=r.artifacts)
                    for r in s.stages],
            artifacts=dict(sorted(s.artifacts.items())),
            failed_stage=failed_stage,
            error=build_error_detail(exc) if exc is not None else None,
        )
