"""
Regression manifolds: grids of conditional-quantile lines y(q | x).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tabulate import tabulate

from evmanifold.app.core.evmodels import EvModel, SemiparamLn
from evmanifold.app.core.manifold_exceptions import DataError, DomainError, SolverError, ValidationError
from evmanifold.app.core.margins import data_quantile, empirical_cdf
from evmanifold.app.core.spectral import GaussQuadRule
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("manifold")

BRACKET_START = (1e-8, 1.0)
EXTREME_Q = 0.01
EXTREME_REL_TOL = 1e-8
MONOTONE_SLACK = 1e-10


class ScaleTag(Enum):
    FRECHET = "frechet"
    ORIGINAL = "original"


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-10
    max_iter: int = 200
    bracket_growth: float = 4.0

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValidationError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_iter < 20:
            raise ValidationError(f"max_iter must be at least 20, got {self.max_iter}")
        if not self.bracket_growth > 1:
            raise ValidationError(f"bracket_growth must exceed 1, got {self.bracket_growth}")

    def as_dict(self) -> Dict[str, float]:
        return {"rel_tol": self.rel_tol, "max_iter": self.max_iter, "bracket_growth": self.bracket_growth}


def _fail(message: str, q: np.ndarray, x: np.ndarray, at: int, stage: str) -> SolverError:
    return SolverError(f"{message} at q={q[at]:.6g}, x={x[at]:.6g}",
                       stage=stage, index=at, point=(float(q[at]), float(x[at])))


def solve_conditional_quantiles(model: EvModel, q, x, cfg: SolverConfig,
                                stage: str = "conditional_quantile") -> np.ndarray:
    """Vectorised geometric bisection for the smallest y with G(y | x) >= q"""
    qa, xa = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(x, dtype=float))
    shape = qa.shape
    qf, xf = qa.ravel().copy(), xa.ravel().copy()
    if np.any(~((qf > 0) & (qf < 1))):
        raise DomainError(f"quantile levels must lie in (0, 1), got {q}")
    if np.any(~(xf > 0)):
        raise DomainError(f"conditioning values must be positive, got {x}")

    tol = np.where((qf < EXTREME_Q) | (qf > 1 - EXTREME_Q), max(cfg.rel_tol, EXTREME_REL_TOL), cfg.rel_tol)
    lo = np.full(qf.size, BRACKET_START[0])
    hi = np.full(qf.size, BRACKET_START[1])

    def cdf(y: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return np.asarray(model.conditional_cdf(y, xf[idx]), dtype=float)

    everything = np.arange(qf.size)
    f_lo = cdf(lo, everything)
    f_hi = cdf(hi, everything)

    for _ in range(cfg.max_iter):
        below = np.flatnonzero(f_lo >= qf)
        if below.size == 0:
            break
        lo[below] /= cfg.bracket_growth
        f_lo[below] = cdf(lo[below], below)
    else:
        raise _fail("lower bracket not found", qf, xf, int(np.flatnonzero(f_lo >= qf)[0]), stage)

    for _ in range(cfg.max_iter):
        above = np.flatnonzero(f_hi < qf)
        if above.size == 0:
            break
        lo[above], f_lo[above] = hi[above], f_hi[above]
        hi[above] *= cfg.bracket_growth
        f_hi[above] = cdf(hi[above], above)
    else:
        raise _fail("upper bracket not found", qf, xf, int(np.flatnonzero(f_hi < qf)[0]), stage)

    for _ in range(cfg.max_iter):
        active = np.flatnonzero(hi - lo > tol * hi)
        if active.size == 0:
            break
        mid = np.sqrt(lo[active] * hi[active])
        f_mid = cdf(mid, active)
        broken = (f_mid < f_lo[active] - MONOTONE_SLACK) | (f_mid > f_hi[active] + MONOTONE_SLACK)
        if np.any(broken):
            raise _fail("non-monotone conditional CDF", qf, xf, int(active[np.flatnonzero(broken)[0]]), stage)
        up = f_mid < qf[active]
        lo_idx, hi_idx = active[up], active[~up]
        lo[lo_idx], f_lo[lo_idx] = mid[up], f_mid[up]
        hi[hi_idx], f_hi[hi_idx] = mid[~up], f_mid[~up]
    else:
        raise _fail("bisection did not converge", qf, xf, int(np.flatnonzero(hi - lo > tol * hi)[0]), stage)

    return hi.reshape(shape)


def conditional_quantile(model: EvModel, q: float, x: float, cfg: Optional[SolverConfig] = None) -> float:
    """Smallest y with conditional_cdf(y | x) >= q"""
    return float(solve_conditional_quantiles(model, q, x, cfg or SolverConfig()))


@dataclass(frozen=True, eq=False)
class RegressionManifold:
    """Conditional-quantile grid; y has one row per q and one column per x"""
    q_grid: np.ndarray
    x_grid: np.ndarray
    y: np.ndarray
    scale_tag: ScaleTag = ScaleTag.FRECHET
    model: str = ""
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.y.shape != (self.q_grid.size, self.x_grid.size):
            raise ValidationError(f"manifold matrix has shape {self.y.shape}, expected "
                                  f"({self.q_grid.size}, {self.x_grid.size})")

    def line(self, q: float) -> np.ndarray:
        hit = np.flatnonzero(np.isclose(self.q_grid, q, rtol=0.0, atol=1e-12))
        if hit.size == 0:
            raise ValidationError(f"q={q} is not on the manifold grid")
        return self.y[hit[0]]

    def to_frame(self) -> pd.DataFrame:
        qq, xx = np.meshgrid(self.q_grid, self.x_grid, indexing="ij")
        return pd.DataFrame({
            "q": qq.ravel(),
            "x": xx.ravel(),
            "y": self.y.ravel(),
            "scale": self.scale_tag.value,
        })

    def metadata(self, solver: Optional[SolverConfig] = None) -> Dict[str, object]:
        meta = {
            "model": self.model,
            "params": dict(self.params),
            "q_grid": [float(v) for v in self.q_grid],
            "x_grid": [float(v) for v in self.x_grid],
            "scale": self.scale_tag.value,
        }
        if solver is not None:
            meta["solver"] = solver.as_dict()
        return meta


def _check_grid(values, what: str, lower: float, upper: float) -> np.ndarray:
    grid = np.asarray(values, dtype=float).ravel()
    if grid.size == 0:
        raise ValidationError(f"{what} grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError(f"{what} grid must be strictly increasing")
    if np.any(~((grid > lower) & (grid < upper))):
        raise ValidationError(f"{what} grid values must lie in ({lower}, {upper})")
    return grid


def build_manifold(model: EvModel, q_grid: Sequence[float], x_grid: Sequence[float],
                   cfg: Optional[SolverConfig] = None) -> RegressionManifold:
    cfg = cfg or SolverConfig()
    qs = _check_grid(q_grid, "q", 0.0, 1.0)
    xs = _check_grid(x_grid, "x", 0.0, np.inf)
    qq, xx = np.meshgrid(qs, xs, indexing="ij")

    try:
        y = solve_conditional_quantiles(model, qq, xx, cfg, stage="build_manifold")
    except SolverError as e:
        cell = tuple(int(v) for v in np.unravel_index(e.index, qq.shape)) if e.index is not None else None
        raise SolverError(f"manifold cell {cell} failed: {e}", stage="build_manifold", point=e.point, cell=cell)

    drops = np.argwhere(np.diff(y, axis=0) < -MONOTONE_SLACK * y[1:])
    if drops.size:
        i, j = (int(v) for v in drops[0])
        raise SolverError(f"manifold not monotone in q at cell ({i + 1}, {j})", stage="build_manifold",
                          cell=(i + 1, j))

    logger.debug("Manifold built", extra={"model": model.label(), "cells": int(y.size)})
    return RegressionManifold(qs, xs, y, ScaleTag.FRECHET, model.name, model.params())


def posterior_mean_manifold(draws: np.ndarray, q_grid: Sequence[float], x_grid: Sequence[float],
                            cfg: Optional[SolverConfig] = None, n_draws: int = 40,
                            rule: Optional[GaussQuadRule] = None) -> RegressionManifold:
    """Average of the plug-in manifolds over an evenly thinned set of posterior sigma draws"""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise DataError("no posterior draws to average")
    picks = np.unique(np.linspace(0, draws.size - 1, min(n_draws, draws.size)).round().astype(int))
    grids = [build_manifold(SemiparamLn.with_sigma(float(draws[i]), rule), q_grid, x_grid, cfg).y
             for i in picks]
    logger.info("Posterior-mean manifold built", extra={"draws": int(picks.size)})
    return RegressionManifold(
        np.asarray(q_grid, dtype=float), np.asarray(x_grid, dtype=float), np.mean(grids, axis=0),
        ScaleTag.FRECHET, "semiparam", {"sigma": float(np.mean(draws[picks]))},
    )


def logistic_approx_line(alpha: float, q: float, x):
    """Closed-form large-x approximation to the logistic conditional quantile: intercept plus slope * x"""
    if not 0 < alpha < 1:
        raise DomainError(f"logistic approximation needs alpha strictly inside (0, 1), got {alpha}")
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 10):
        logger.warning("Logistic approximation used below x=10", extra={"alpha": alpha, "x_min": float(xa.min())})

    p = q ** (1.0 / (alpha - 1.0))
    intercept = (alpha / (1.0 - alpha)) * (p - 1.0) ** (-alpha - 1.0) \
        * (q ** (alpha / (1.0 - alpha)) - 1.0) * p
    slope = (q ** (-1.0 / (1.0 - alpha)) - 1.0) ** (-alpha)
    out = intercept + slope * xa
    return float(out) if np.ndim(x) == 0 else out


def approx_frame(m: RegressionManifold, alpha: float) -> pd.DataFrame:
    """Exact manifold lines next to the closed-form logistic approximation"""
    if m.scale_tag != ScaleTag.FRECHET:
        raise ValidationError("the logistic approximation is defined on the Frechet scale")
    frame = m.to_frame().rename(columns={"y": "y_exact"})
    frame["y_approx"] = np.concatenate([logistic_approx_line(alpha, float(q), m.x_grid) for q in m.q_grid])
    return frame[["q", "x", "y_exact", "y_approx", "scale"]]


def frechet_to_data(z, data: np.ndarray):
    """Empirical quantile of the data at probability exp(-1/z)"""
    return data_quantile(data, np.exp(-1.0 / np.asarray(z, dtype=float)))


def manifold_to_original_scale(m: RegressionManifold, x_data: np.ndarray, y_data: np.ndarray) -> RegressionManifold:
    if m.scale_tag != ScaleTag.FRECHET:
        raise ValidationError("manifold is already on the original scale")
    if np.size(x_data) == 0 or np.size(y_data) == 0:
        raise DataError("original-scale mapping needs non-empty data for both margins")
    return RegressionManifold(
        q_grid=m.q_grid,
        x_grid=np.asarray(frechet_to_data(m.x_grid, x_data), dtype=float),
        y=np.asarray(frechet_to_data(m.y, y_data), dtype=float).reshape(m.y.shape),
        scale_tag=ScaleTag.ORIGINAL,
        model=m.model,
        params=dict(m.params),
    )


# --- quantile tables ---------------------------------------------------------

def clamp_probs(probs, n: int) -> np.ndarray:
    return np.clip(np.asarray(probs, dtype=float), 1.0 / (n + 1.0), n / (n + 1.0))


def covariate_levels_from_probs(probs: Sequence[float], x_data: np.ndarray) -> np.ndarray:
    data = np.asarray(x_data, dtype=float)
    return np.asarray(data_quantile(data, clamp_probs(probs, data.size)), dtype=float)


@dataclass(frozen=True, eq=False)
class QuantileTable:
    q_levels: np.ndarray
    covariate_levels: np.ndarray
    values: np.ndarray  # |q_levels| x |covariate_levels|
    scale_tag: ScaleTag
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None

    @property
    def has_intervals(self) -> bool:
        return self.lo is not None and self.hi is not None

    def to_frame(self) -> pd.DataFrame:
        rows: List[Dict[str, float]] = []
        for i, q in enumerate(self.q_levels):
            for j, level in enumerate(self.covariate_levels):
                row = {"q": float(q), "covariate": float(level), "value": float(self.values[i, j])}
                if self.has_intervals:
                    row["lo"] = float(self.lo[i, j])
                    row["hi"] = float(self.hi[i, j])
                row["scale"] = self.scale_tag.value
                rows.append(row)
        return pd.DataFrame(rows)

    def render(self, digits: int = 4) -> str:
        headers = ["q \\ covariate"] + [f"{level:.{digits}g}" for level in self.covariate_levels]
        body = []
        for i, q in enumerate(self.q_levels):
            cells = []
            for j in range(self.covariate_levels.size):
                text = f"{self.values[i, j]:.{digits}g}"
                if self.has_intervals:
                    text += f" [{self.lo[i, j]:.{digits}g}, {self.hi[i, j]:.{digits}g}]"
                cells.append(text)
            body.append([f"{100 * q:g}%"] + cells)
        return tabulate(body, headers=headers, tablefmt="simple") + "\n"


def predict_quantile_table(
    model: EvModel,
    loss_levels: Sequence[float],
    q_levels: Sequence[float],
    cfg: Optional[SolverConfig] = None,
    *,
    x_data: Optional[np.ndarray] = None,
    y_data: Optional[np.ndarray] = None,
    draws: Optional[np.ndarray] = None,
    n_draws: int = 40,
) -> QuantileTable:
    """Conditional quantiles for each (q, covariate level).

    With x_data and y_data the covariate levels are read on the original scale
    and the quantiles are reported there; otherwise both stay on the Frechet
    scale. Posterior sigma draws add a 95% interval to every cell.
    """
    cfg = cfg or SolverConfig()
    qs = _check_grid(q_levels, "q", 0.0, 1.0)
    levels = np.asarray(loss_levels, dtype=float).ravel()
    if levels.size == 0:
        raise ValidationError("covariate levels are empty")

    original = x_data is not None and y_data is not None
    if original:
        x_arr = np.asarray(x_data, dtype=float)
        probs = clamp_probs(empirical_cdf(x_arr)(levels), x_arr.size)
        z = -1.0 / np.log(probs)
    else:
        if np.any(levels <= 0):
            raise DomainError("Frechet-scale covariate levels must be positive")
        z = levels

    qq, zz = np.meshgrid(qs, z, indexing="ij")

    def solve(m: EvModel) -> np.ndarray:
        y = solve_conditional_quantiles(m, qq, zz, cfg, stage="quantile_table")
        return np.asarray(frechet_to_data(y, y_data), dtype=float).reshape(y.shape) if original else y

    values = solve(model)
    lo = hi = None
    if draws is not None and np.size(draws) > 0:
        draws = np.asarray(draws, dtype=float)
        rule = model.rule if isinstance(model, SemiparamLn) else None
        picks = np.unique(np.linspace(0, draws.size - 1, min(n_draws, draws.size)).round().astype(int))
        stack = np.stack([solve(SemiparamLn.with_sigma(float(draws[i]), rule)) for i in picks])
        lo, hi = np.quantile(stack, [0.025, 0.975], axis=0)

    return QuantileTable(qs, levels, values, ScaleTag.ORIGINAL if original else ScaleTag.FRECHET, lo, hi)
