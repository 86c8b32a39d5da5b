"""
Likelihood-based model scoring and AIC/BIC ranking.
"""

from dataclasses import asdict, dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd
from tabulate import tabulate

from evmanifold.app.core.evmodels import EvModel
from evmanifold.app.core.manifold_exceptions import DataError, NumericalError, ValidationError
from evmanifold.app.core.margins import FrechetSample
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("selection")


@dataclass(frozen=True)
class ModelScore:
    model_name: str
    k: int
    n: int
    loglik: float
    aic: float
    bic: float

    @classmethod
    def from_loglik(cls, model_name: str, k: int, n: int, loglik: float) -> "ModelScore":
        if k < 1:
            raise ValidationError(f"parameter count k must be at least 1, got {k}")
        if n < 1:
            raise ValidationError(f"observation count n must be at least 1, got {n}")
        if not np.isfinite(loglik):
            raise NumericalError(f"log-likelihood of {model_name} is not finite", stage="score")
        return cls(model_name, int(k), int(n), float(loglik),
                   aic=2.0 * k - 2.0 * loglik,
                   bic=k * float(np.log(n)) - 2.0 * loglik)

    def as_dict(self) -> dict:
        return asdict(self)


def score(model: EvModel, x: FrechetSample, y: FrechetSample, k: int) -> ModelScore:
    """Sum of log-densities over the pairs, with AIC and BIC"""
    if len(x) != len(y):
        raise DataError(f"paired samples differ in length: {len(x)} vs {len(y)}", stage="score")
    if len(x) == 0:
        raise DataError("cannot score an empty sample", stage="score")
    ll = np.asarray(model.log_density(x.values, y.values), dtype=float)
    result = ModelScore.from_loglik(model.label(), k, len(x), float(np.sum(ll)))
    logger.info("Model scored", extra={"model": result.model_name, "k": k, "n": result.n,
                                        "loglik": result.loglik, "aic": result.aic, "bic": result.bic})
    return result


@dataclass(frozen=True)
class RankedScore:
    rank: int
    score: ModelScore
    delta_aic: float
    delta_bic: float


@dataclass(frozen=True)
class Ranking:
    entries: List[RankedScore]
    disagreement: bool  # AIC and BIC order the models differently

    @property
    def best(self) -> ModelScore:
        return self.entries[0].score

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "rank": e.rank,
            "model": e.score.model_name,
            "k": e.score.k,
            "n": e.score.n,
            "loglik": e.score.loglik,
            "aic": e.score.aic,
            "bic": e.score.bic,
            "delta_aic": e.delta_aic,
            "delta_bic": e.delta_bic,
        } for e in self.entries])

    def render(self) -> str:
        text = tabulate(self.to_frame(), headers="keys", tablefmt="simple", showindex=False, floatfmt=".4f")
        if self.disagreement:
            text += "\nnote: AIC and BIC rank the models differently"
        return text + "\n"


def compare(scores: Sequence[ModelScore]) -> Ranking:
    """Ascending AIC order with differences to the best; ties keep input order"""
    scores = list(scores)
    if len(scores) < 2:
        raise ValidationError(f"comparison needs at least two scores, got {len(scores)}")
    sizes = sorted({s.n for s in scores})
    if len(sizes) > 1:
        raise DataError(f"scores were computed on different sample sizes: {sizes}", stage="compare")

    by_aic = sorted(range(len(scores)), key=lambda i: scores[i].aic)
    by_bic = sorted(range(len(scores)), key=lambda i: scores[i].bic)
    best_aic = scores[by_aic[0]].aic
    best_bic = min(s.bic for s in scores)

    entries = [
        RankedScore(rank=pos + 1, score=scores[i], delta_aic=scores[i].aic - best_aic,
                    delta_bic=scores[i].bic - best_bic)
        for pos, i in enumerate(by_aic)
    ]
    disagreement = by_aic != by_bic
    if disagreement:
        logger.info("AIC and BIC disagree on the model order",
                    extra={"aic_order": [scores[i].model_name for i in by_aic],
                           "bic_order": [scores[i].model_name for i in by_bic]})
    return Ranking(entries, disagreement)
