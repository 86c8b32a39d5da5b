"""
Transformed-stationary decomposition.

    x_t = (y_t - T0_t - s_T[month t]) / (S0_t * s_S[month t])

T0 is a running mean over a multi-year window w, s_T the monthly mean of the
detrended series, S0 a running standard deviation over w smoothed over w/l,
and s_S the monthly mean ratio of a short-window (wsn) running standard
deviation to S0. Fitted stationary GEV parameters map back to time-varying
ones through the same affine transform.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from evmanifold.app.core.manifold_exceptions import DataError, NumericalError, ValidationError
from evmanifold.app.core.margins import GevParams, UniSeries, gev_quantile
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("tstationary")

DAYS_PER_YEAR = 365.25
YEARLY_SPACING_DAYS = 300.0


@dataclass(frozen=True)
class TsConfig:
    w: float = 5.0  # years
    wsn: float = 31.0  # days
    l: int = 2
    extra_smoothing: bool = False
    season_enabled: Optional[bool] = None  # None: decide from the sampling interval

    def __post_init__(self):
        if self.w < 2:
            raise ValidationError(f"trend window w must be at least 2 years, got {self.w}")
        if not 0 < self.wsn <= 92:
            raise ValidationError(f"short window wsn must lie in (0, 92] days, got {self.wsn}")
        if int(self.l) != self.l or self.l < 1:
            raise ValidationError(f"smoothing divisor l must be a positive integer, got {self.l}")
        if self.w * DAYS_PER_YEAR / self.l < self.wsn:
            raise ValidationError("w/l must not be shorter than wsn")

    @property
    def w_days(self) -> float:
        return self.w * DAYS_PER_YEAR


@dataclass(frozen=True, eq=False)
class TsDecomposition:
    times: np.ndarray
    values: np.ndarray
    trend: np.ndarray
    trend_season: np.ndarray  # 12, indexed by month - 1
    std: np.ndarray
    std_season: np.ndarray  # 12
    season_enabled: bool

    def __post_init__(self):
        if np.any(~(self.std > 0)):
            raise NumericalError("running standard deviation must be strictly positive", stage="stationarize")
        if np.any(~(self.std_season > 0)):
            raise NumericalError("seasonal standard-deviation factors must be strictly positive", stage="stationarize")

    def __len__(self) -> int:
        return int(self.trend.size)

    @property
    def months(self) -> np.ndarray:
        return pd.DatetimeIndex(self.times).month.to_numpy()

    @property
    def location(self) -> np.ndarray:
        """T0_t + s_T[month t]"""
        return self.trend + self.trend_season[self.months - 1]

    @property
    def scale(self) -> np.ndarray:
        """S0_t * s_S[month t]"""
        return self.std * self.std_season[self.months - 1]

    def to_frame(self, stationarized: Optional[np.ndarray] = None) -> pd.DataFrame:
        months = self.months - 1
        if stationarized is None:
            stationarized = (self.values - self.location) / self.scale
        return pd.DataFrame({
            "date": pd.DatetimeIndex(self.times).strftime("%Y-%m-%d"),
            "value": self.values,
            "trend": self.trend,
            "trend_season": self.trend_season[months],
            "std": self.std,
            "std_season": self.std_season[months],
            "stationarized": stationarized,
        })


@dataclass(frozen=True, eq=False)
class TimeVaryingGev:
    times: np.ndarray
    mu_t: np.ndarray
    sigma_t: np.ndarray
    xi: float

    def quantile(self, q: float) -> np.ndarray:
        """Time-indexed return level at probability q"""
        return self.mu_t + self.sigma_t * gev_quantile(q, GevParams(0.0, 1.0, self.xi))

    def to_frame(self, levels: Tuple[float, ...] = (0.5, 0.9, 0.99)) -> pd.DataFrame:
        frame = pd.DataFrame({
            "date": pd.DatetimeIndex(self.times).strftime("%Y-%m-%d"),
            "mu": self.mu_t,
            "sigma": self.sigma_t,
            "xi": np.full(self.mu_t.size, self.xi),
        })
        for q in levels:
            frame[f"q{int(round(q * 100))}"] = self.quantile(q)
        return frame


def running_mean(t_days: np.ndarray, values: np.ndarray, half_width: float) -> np.ndarray:
    """Mean of the values whose time lies in [t - half_width, t + half_width]; edges use the truncated window"""
    t = np.asarray(t_days, dtype=float)
    v = np.asarray(values, dtype=float)
    offset = v.mean()
    csum = np.concatenate(([0.0], np.cumsum(v - offset)))
    lo = np.searchsorted(t, t - half_width - 1e-9, side="left")
    hi = np.searchsorted(t, t + half_width + 1e-9, side="right")
    return (csum[hi] - csum[lo]) / (hi - lo) + offset


def window_counts(t_days: np.ndarray, half_width: float) -> np.ndarray:
    t = np.asarray(t_days, dtype=float)
    lo = np.searchsorted(t, t - half_width - 1e-9, side="left")
    hi = np.searchsorted(t, t + half_width + 1e-9, side="right")
    return hi - lo


def _check_span(series: UniSeries, cfg: TsConfig) -> None:
    covered = series.span_days() + series.median_spacing_days()
    if len(series) < 2 or covered < cfg.w_days * 0.99:
        raise DataError(
            f"trend window of {cfg.w} years exceeds the series span of {covered / DAYS_PER_YEAR:.2f} years"
        )


def running_trend(series: UniSeries, cfg: TsConfig) -> np.ndarray:
    _check_span(series, cfg)
    return running_mean(series.days, series.values, cfg.w_days / 2.0)


def _monthly_mean(series: UniSeries, quantity: np.ndarray, what: str) -> np.ndarray:
    """Mean over years of the per-(year, month) means"""
    index = series.index
    frame = pd.DataFrame({"year": index.year, "month": index.month, "v": quantity})
    per_year = frame.groupby(["month", "year"], sort=True)["v"].mean()
    monthly = per_year.groupby(level="month").mean()
    missing = sorted(set(range(1, 13)) - set(int(m) for m in monthly.index))
    if missing:
        raise DataError(f"{what}: no observations in month(s) {missing}")
    return monthly.reindex(range(1, 13)).to_numpy(dtype=float)


def trend_seasonality(series: UniSeries, trend: np.ndarray) -> np.ndarray:
    if len(trend) != len(series):
        raise DataError(f"trend length {len(trend)} does not match series length {len(series)}")
    return _monthly_mean(series, series.values - trend, "trend seasonality")


def smooth_profile(t_days: np.ndarray, profile: np.ndarray, half_width: float) -> np.ndarray:
    return running_mean(t_days, profile, half_width)


def running_std(series: UniSeries, center: np.ndarray, cfg: TsConfig) -> np.ndarray:
    """Rough running standard deviation over w about ``center``, smoothed over w/l"""
    _check_span(series, cfg)
    if len(center) != len(series):
        raise DataError(f"center length {len(center)} does not match series length {len(series)}")
    t = series.days
    sq = (series.values - center) ** 2
    rough = np.sqrt(np.maximum(running_mean(t, sq, cfg.w_days / 2.0), 0.0))
    if np.any(rough <= 0):
        at = int(np.flatnonzero(rough <= 0)[0])
        raise DataError("zero variance over a full trend window", index=at, stage="running_std")
    smooth = smooth_profile(t, rough, cfg.w_days / (2.0 * cfg.l))
    if cfg.extra_smoothing:
        smooth = smooth_profile(t, smooth, cfg.w_days / (2.0 * cfg.l))
    return smooth


def short_window_std(series: UniSeries, cfg: TsConfig) -> np.ndarray:
    """Running standard deviation about the local mean over the short window wsn"""
    t = series.days
    half = cfg.wsn / 2.0
    counts = window_counts(t, half)
    if np.any(counts < 2):
        raise DataError(
            f"short window of {cfg.wsn} days holds fewer than 2 observations; "
            "disable seasonality for coarsely sampled series"
        )
    v = series.values - series.values.mean()
    mean = running_mean(t, v, half)
    mean_sq = running_mean(t, v ** 2, half)
    return np.sqrt(np.maximum(mean_sq - mean ** 2, 0.0))


def std_seasonality(series: UniSeries, std: np.ndarray, cfg: TsConfig) -> np.ndarray:
    if len(std) != len(series):
        raise DataError(f"std length {len(std)} does not match series length {len(series)}")
    ratio = short_window_std(series, cfg) / std
    season = _monthly_mean(series, ratio, "std seasonality")
    if np.any(season <= 0):
        raise DataError("seasonal standard deviation vanishes in some month")
    return season


def season_enabled_for(series: UniSeries, cfg: TsConfig) -> bool:
    if cfg.season_enabled is not None:
        return bool(cfg.season_enabled)
    spacing = series.median_spacing_days()
    if spacing >= YEARLY_SPACING_DAYS:
        logger.info("Seasonality disabled for yearly-resolution series", extra={"median_spacing_days": spacing})
        return False
    if spacing > cfg.wsn / 3.0:
        logger.info("Seasonality disabled: sampling too coarse for the short window",
                    extra={"median_spacing_days": spacing, "wsn": cfg.wsn})
        return False
    return True


def stationarize(series: UniSeries, cfg: TsConfig) -> Tuple[UniSeries, TsDecomposition]:
    trend = running_trend(series, cfg)
    enabled = season_enabled_for(series, cfg)

    if enabled:
        trend_season = trend_seasonality(series, trend)
        center = trend + trend_season[series.months - 1]
        std = running_std(series, center, cfg)
        std_season = std_seasonality(series, std, cfg)
    else:
        trend_season = np.zeros(12)
        std = running_std(series, trend, cfg)
        std_season = np.ones(12)

    decomposition = TsDecomposition(
        times=series.times,
        values=series.values,
        trend=trend,
        trend_season=trend_season,
        std=std,
        std_season=std_season,
        season_enabled=enabled,
    )
    x = (series.values - decomposition.location) / decomposition.scale
    logger.debug("Series stationarized", extra={
        "n": len(series), "season_enabled": enabled, "x_mean": float(x.mean()), "x_std": float(x.std())
    })
    return series.with_values(x), decomposition


def restore_series(x: UniSeries, d: TsDecomposition) -> UniSeries:
    if len(x) != len(d):
        raise DataError(f"series of length {len(x)} is misaligned with a decomposition of length {len(d)}")
    return x.with_values(x.values * d.scale + d.location)


def destationarize_gev(p: GevParams, d: TsDecomposition) -> TimeVaryingGev:
    scale = d.scale
    sigma_t = scale * p.sigma
    assert np.all(sigma_t > 0), "time-varying GEV scale must stay positive"
    return TimeVaryingGev(
        times=d.times,
        mu_t=scale * p.mu + d.location,
        sigma_t=sigma_t,
        xi=p.xi,
    )
