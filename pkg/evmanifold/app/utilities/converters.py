from typing import Optional

from evmanifold.app.core.evmodels import EvModel, build_model
from evmanifold.app.core.manifold import RegressionManifold
from evmanifold.app.core.margins import GevParams
from evmanifold.app.core.selection import ModelScore, Ranking
from evmanifold.app.core.spectral import GaussQuadRule, PosteriorBand

from evmanifold.app.schemas.summary import (
    GevSummary, GridSpec, ModelSpec, PosteriorSummary, RankingEntry, ScoreEntry
)


def convert_model_to_spec(model: EvModel) -> ModelSpec:
    """Convert an EvModel value to its serialisable spec"""
    return ModelSpec(model=model.name, params=model.params())


def convert_spec_to_model(spec: ModelSpec, rule: Optional[GaussQuadRule] = None) -> EvModel:
    """Rebuild an EvModel from a spec read back from a run summary"""
    return build_model(spec.model, dict(spec.params), rule)


def convert_score_to_entry(score: ModelScore) -> ScoreEntry:
    return ScoreEntry(
        model_name=score.model_name,
        k=score.k,
        n=score.n,
        loglik=score.loglik,
        aic=score.aic,
        bic=score.bic
    )


def convert_entry_to_score(entry: ScoreEntry) -> ModelScore:
    # recompute from loglik so the AIC/BIC identities hold on re-read
    return ModelScore.from_loglik(entry.model_name, entry.k, entry.n, entry.loglik)


def convert_ranking_to_entries(ranking: Ranking) -> list:
    return [
        RankingEntry(
            rank=entry.rank,
            model_name=entry.score.model_name,
            delta_aic=entry.delta_aic,
            delta_bic=entry.delta_bic
        ) for entry in ranking.entries
    ]


def convert_manifold_to_grid(manifold: RegressionManifold) -> GridSpec:
    return GridSpec(
        q_grid=[float(q) for q in manifold.q_grid],
        x_grid=[float(x) for x in manifold.x_grid]
    )


def convert_gev_to_summary(params: GevParams, n_maxima: int) -> GevSummary:
    return GevSummary(mu=params.mu, sigma=params.sigma, xi=params.xi, n_maxima=n_maxima)


def convert_band_to_summary(band: PosteriorBand) -> PosteriorSummary:
    lo, hi = band.sigma_interval()
    return PosteriorSummary(
        sigma_mean=band.sigma_mean,
        sigma_lo=lo,
        sigma_hi=hi,
        acceptance=band.acceptance,
        draws=int(band.draws.size)
    )
