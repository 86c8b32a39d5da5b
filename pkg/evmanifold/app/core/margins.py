"""
Univariate margins: GEV distribution, block maxima, empirical CDFs and the
rank/(n+1) transform to unit Frechet scale.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np
import pandas as pd
from scipy import optimize, special, stats

from evmanifold.app.core.manifold_exceptions import DataError, DomainError, FitError
from evmanifold.app.utilities.io import write_frame
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("margins")

ArrayLike = Union[float, np.ndarray]

# |xi| below this routes to the exact Gumbel formulas
GUMBEL_BAND = 1e-8

BLOCK_FREQS = {"week": "W", "month": "M", "year": "Y"}


@dataclass(frozen=True)
class GevParams:
    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not np.isfinite(self.mu) or not np.isfinite(self.xi):
            raise DomainError(f"GEV location and shape must be finite, got mu={self.mu}, xi={self.xi}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"GEV scale must be positive, got sigma={self.sigma}")

    @property
    def is_gumbel(self) -> bool:
        return abs(self.xi) < GUMBEL_BAND

    def as_dict(self) -> dict:
        return {"mu": float(self.mu), "sigma": float(self.sigma), "xi": float(self.xi)}


@dataclass(frozen=True, eq=False)
class UniSeries:
    """Calendar-indexed observations of one variable"""
    times: np.ndarray  # datetime64[ns], strictly increasing
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype="datetime64[ns]")
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 1 or times.shape != values.shape:
            raise DataError(f"times and values must be equal-length 1-D arrays, got {times.shape} and {values.shape}")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise DataError(f"missing or non-finite value at index {bad[0]}", index=int(bad[0]))
        if times.size > 1:
            steps = np.diff(times.astype("int64"))
            bad = np.flatnonzero(steps <= 0)
            if bad.size:
                raise DataError(f"timestamps must be strictly increasing (index {bad[0] + 1})", index=int(bad[0] + 1))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def index(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(self.times)

    @property
    def months(self) -> np.ndarray:
        """Month of year, 1..12"""
        return self.index.month.to_numpy()

    @property
    def days(self) -> np.ndarray:
        """Time axis in days since the first observation"""
        return (self.times - self.times[0]).astype("timedelta64[s]").astype(float) / 86400.0

    def median_spacing_days(self) -> float:
        if len(self) < 2:
            return float("inf")
        return float(np.median(np.diff(self.days)))

    def span_days(self) -> float:
        return float(self.days[-1]) if len(self) else 0.0

    def with_values(self, values: np.ndarray) -> "UniSeries":
        return UniSeries(self.times, values)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"date": self.index.strftime("%Y-%m-%d"), "value": self.values})


@dataclass(frozen=True, eq=False)
class FrechetSample:
    values: np.ndarray
    source_ranks: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise DataError("Frechet sample must be one-dimensional")
        bad = np.flatnonzero(~(np.isfinite(values) & (values > 0)))
        if bad.size:
            raise DataError(f"Frechet values must be positive and finite (index {bad[0]})", index=int(bad[0]))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "source_ranks", np.asarray(self.source_ranks, dtype=np.int64))

    @classmethod
    def from_values(cls, values: np.ndarray) -> "FrechetSample":
        """Wrap values already on the unit Frechet scale"""
        values = np.asarray(values, dtype=float)
        return cls(values, stats.rankdata(values, method="max").astype(np.int64))

    def __len__(self) -> int:
        return int(self.values.size)


# --- GEV -------------------------------------------------------------------

def _reduced(x: ArrayLike, p: GevParams, strict: bool = True) -> np.ndarray:
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    if p.is_gumbel:
        return z
    s = 1.0 + p.xi * z
    if strict and np.any(s <= 0):
        at = float(np.asarray(x, dtype=float).ravel()[np.flatnonzero(np.ravel(s) <= 0)[0]])
        raise DomainError(
            f"x={at} lies outside the GEV support (1 + xi*(x - mu)/sigma <= 0)", point=(at,)
        )
    return z


def _log_t(z: np.ndarray, p: GevParams) -> np.ndarray:
    """log of t(x) = [1 + xi z]^(-1/xi), or exp(-z) in the Gumbel band"""
    if p.is_gumbel:
        return -z
    return -np.log1p(p.xi * z) / p.xi


def _unwrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


def gev_cdf(x: ArrayLike, p: GevParams) -> ArrayLike:
    """GEV distribution function exp{-[1 + xi(x - mu)/sigma]^(-1/xi)}"""
    z = _reduced(x, p)
    return _unwrap(x, np.exp(-np.exp(_log_t(z, p))))


def gev_logpdf(x: ArrayLike, p: GevParams) -> ArrayLike:
    z = _reduced(x, p)
    log_t = _log_t(z, p)
    if p.is_gumbel:
        out = -np.log(p.sigma) - z - np.exp(-z)
    else:
        out = -np.log(p.sigma) + (1.0 + p.xi) * log_t - np.exp(log_t)
    return _unwrap(x, out)


def gev_quantile(q: ArrayLike, p: GevParams) -> ArrayLike:
    qa = np.asarray(q, dtype=float)
    if np.any(~((qa > 0) & (qa < 1))):
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    y = -np.log(-np.log(qa))
    if p.is_gumbel:
        out = p.mu + p.sigma * y
    else:
        out = p.mu + p.sigma * np.expm1(p.xi * y) / p.xi
    return _unwrap(q, out)


def _gev_nll(theta: np.ndarray, data: np.ndarray) -> float:
    mu, log_sigma, xi = theta
    sigma = np.exp(log_sigma)
    z = (data - mu) / sigma
    if abs(xi) < GUMBEL_BAND:
        return float(data.size * log_sigma + np.sum(z + np.exp(-z)))
    s = 1.0 + xi * z
    if np.any(s <= 0):
        return np.inf
    log_s = np.log(s)
    value = data.size * log_sigma + (1.0 + 1.0 / xi) * np.sum(log_s) + np.sum(np.exp(-log_s / xi))
    return float(value) if np.isfinite(value) else np.inf


def pwm_start(data: np.ndarray) -> GevParams:
    """Probability-weighted-moment estimates, used to start the likelihood search"""
    xs = np.sort(data)
    n = xs.size
    j = np.arange(1, n + 1, dtype=float)
    b0 = xs.mean()
    b1 = np.sum((j - 1) / (n - 1) * xs) / n
    b2 = np.sum((j - 1) * (j - 2) / ((n - 1) * (n - 2)) * xs) / n
    l2 = 2 * b1 - b0
    tau3 = (6 * b2 - 6 * b1 + b0) / l2
    c = 2.0 / (3.0 + tau3) - np.log(2.0) / np.log(3.0)
    k = 7.859 * c + 2.9554 * c ** 2
    if abs(k) < 1e-6:
        sigma = l2 / np.log(2.0)
        return GevParams(b0 - np.euler_gamma * sigma, sigma, 0.0)
    g = special.gamma(1.0 + k)
    sigma = l2 * k / ((1.0 - 2.0 ** (-k)) * g)
    mu = b0 - sigma * (1.0 - g) / k
    return GevParams(float(mu), float(sigma), float(-k))


def fit_gev(maxima: np.ndarray, max_iter: int = 4000) -> GevParams:
    """Maximum-likelihood GEV fit by Nelder-Mead over (mu, log sigma, xi)"""
    data = np.asarray(maxima, dtype=float).ravel()
    if data.size < 10:
        raise DataError(f"fit_gev needs at least 10 observations, got {data.size}")
    bad = np.flatnonzero(~np.isfinite(data))
    if bad.size:
        raise DataError(f"non-finite value at index {bad[0]}", index=int(bad[0]))
    if np.ptp(data) == 0:
        raise DataError("degenerate input: all values are equal")

    starts = []
    try:
        start = pwm_start(data)
        # keep the start inside the support
        if np.isfinite(_gev_nll(np.array([start.mu, np.log(start.sigma), start.xi]), data)):
            starts.append(start)
    except (DomainError, FloatingPointError, ValueError):
        pass
    scale = np.std(data) * np.sqrt(6.0) / np.pi
    starts.append(GevParams(float(np.mean(data) - np.euler_gamma * scale), float(scale), 0.0))

    best = None
    for start in starts:
        x0 = np.array([start.mu, np.log(start.sigma), start.xi])
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            res = optimize.minimize(
                _gev_nll, x0, args=(data,), method="Nelder-Mead",
                options={"maxiter": max_iter, "maxfev": 2 * max_iter, "xatol": 1e-9, "fatol": 1e-10},
            )
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res

    if best is None or not best.success:
        message = best.message if best is not None else "no feasible start"
        raise FitError(f"GEV fit did not converge: {message}", stage="fit_gev")

    mu, log_sigma, xi = best.x
    params = GevParams(float(mu), float(np.exp(log_sigma)), float(xi))
    logger.debug("GEV fitted", extra={"n": int(data.size), **params.as_dict(), "nll": float(best.fun)})
    return params


# --- block maxima and empirical transforms -----------------------------------

def block_maxima(series: UniSeries, block: str) -> UniSeries:
    """One maximum per calendar block, stamped at the block centre"""
    if len(series) == 0:
        raise DataError("block maxima of an empty series")
    if block not in BLOCK_FREQS:
        raise DomainError(f"block must be one of {sorted(BLOCK_FREQS)}, got {block!r}")

    periods = series.index.to_period(BLOCK_FREQS[block])
    frame = pd.DataFrame({"value": series.values, "period": periods})
    grouped = frame.groupby("period", sort=True)["value"].agg(["max", "count"])
    if len(grouped) < 2:
        raise DataError(f"series spans a single {block}; block maxima need at least two blocks")

    # stub blocks at either end are dropped when they hold under half the typical count
    nominal = float(np.median(grouped["count"]))
    keep = np.ones(len(grouped), dtype=bool)
    for pos in (0, len(grouped) - 1):
        if grouped["count"].iloc[pos] < 0.5 * nominal:
            keep[pos] = False
            logger.info(f"Dropping incomplete {block} block {grouped.index[pos]}",
                        extra={"count": int(grouped['count'].iloc[pos]), "nominal": nominal})
    grouped = grouped[keep]

    starts = grouped.index.start_time
    ends = grouped.index.end_time
    centres = (starts + (ends - starts) / 2).floor("D")
    return UniSeries(centres.to_numpy(), grouped["max"].to_numpy(dtype=float))


def empirical_cdf(data: np.ndarray) -> Callable[[ArrayLike], ArrayLike]:
    """F(x) = #{data <= x} / (n + 1)"""
    ordered = np.sort(np.asarray(data, dtype=float).ravel())
    if ordered.size == 0:
        raise DataError("empirical CDF of empty data")
    denom = ordered.size + 1.0

    def cdf(x: ArrayLike) -> ArrayLike:
        out = np.searchsorted(ordered, np.asarray(x, dtype=float), side="right") / denom
        return float(out) if np.ndim(x) == 0 else out

    return cdf


def to_unit_frechet(data: np.ndarray) -> FrechetSample:
    values = np.asarray(data, dtype=float).ravel()
    if values.size < 2:
        raise DataError(f"unit Frechet transform needs at least 2 values, got {values.size}")
    ranks = stats.rankdata(values, method="max").astype(np.int64)
    frechet = -1.0 / np.log(ranks / (values.size + 1.0))
    return FrechetSample(frechet, ranks)


def to_losses(series: UniSeries) -> UniSeries:
    """Negative log returns -log(v_t / v_{t-1}); the first observation is dropped"""
    if len(series) < 2:
        raise DataError("loss series needs at least two observations")
    bad = np.flatnonzero(series.values <= 0)
    if bad.size:
        raise DataError(f"negative log returns need positive values (index {bad[0]})", index=int(bad[0]))
    losses = -np.diff(np.log(series.values))
    return UniSeries(series.times[1:], losses)


# --- CSV ---------------------------------------------------------------------

def read_series_csv(path: Union[str, Path]) -> UniSeries:
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    try:
        frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse {path}: {e}")

    missing = {"date", "value"} - set(frame.columns)
    if missing:
        raise DataError(f"{path} is missing column(s) {sorted(missing)}; expected header 'date,value'")
    if frame.empty:
        raise DataError(f"{path} holds no rows")

    try:
        times = pd.to_datetime(frame["date"], format="ISO8601")
    except (ValueError, TypeError) as e:
        raise DataError(f"{path}: unparseable date: {e}")
    values = pd.to_numeric(frame["value"], errors="coerce")
    bad = np.flatnonzero(values.isna().to_numpy() | times.isna().to_numpy())
    if bad.size:
        raise DataError(f"{path}: missing or non-numeric entry at row {bad[0]}", index=int(bad[0]))

    series = UniSeries(times.to_numpy(dtype="datetime64[ns]"), values.to_numpy(dtype=float))
    logger.debug(f"Read {len(series)} observations from {path}")
    return series


def write_series_csv(path: Union[str, Path], series: UniSeries) -> Path:
    return write_frame(path, series.to_frame())


def frechet_cdf(x: ArrayLike) -> ArrayLike:
    return np.exp(-1.0 / np.asarray(x, dtype=float))


def ks_distance_to_frechet(values: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between a sample and exp(-1/x)"""
    return float(stats.kstest(np.asarray(values, dtype=float), frechet_cdf).statistic)


def data_quantile(data: np.ndarray, prob: ArrayLike) -> ArrayLike:
    """Step (type-1) empirical quantile matching the rank/(n + 1) forward transform"""
    ordered = np.sort(np.asarray(data, dtype=float).ravel())
    if ordered.size == 0:
        raise DataError("empirical quantile of empty data")
    n = ordered.size
    p = np.asarray(prob, dtype=float)
    rank = np.clip(np.ceil(p * (n + 1) - 1e-9), 1, n).astype(np.int64)
    out = ordered[rank - 1]
    return float(out) if np.ndim(prob) == 0 else out
