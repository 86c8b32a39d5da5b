"""
Bivariate extreme value models on unit Frechet margins.

Each model supplies the exponent measure V, from which

    joint_cdf(x, y)        = exp(-V(x, y))
    conditional_cdf(y | x) = -V_x(x, y) * x^2 * exp(1/x - V(x, y))
    density(x, y)          = exp(-V) * (V_x V_y - V_xy)
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, special

from evmanifold.app.core.manifold_exceptions import DomainError, FitError, NumericalError, ValidationError
from evmanifold.app.core.margins import FrechetSample, UniSeries
from evmanifold.app.core.spectral import (
    GaussQuadRule, LnSpectral, exponent_parts, ln_log_density
)
from evmanifold.app.utilities.random_streams import stream
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("evmodels")

LOG_2PI_HALF = 0.5 * np.log(2.0 * np.pi)


class ModelKind(Enum):
    LOGISTIC = "logistic"
    HUSLER_REISS = "hr"
    COLES_TAWN = "ct"
    SEMIPARAM_LN = "semiparam"


def _as_pair(x, y) -> Tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if np.any(~(xa > 0)) or np.any(~(ya > 0)):
        raise DomainError(f"Frechet-scale arguments must be positive, got x={x}, y={y}")
    return np.broadcast_arrays(xa, ya)


def _out(x, y, value):
    return float(value) if np.ndim(x) == 0 and np.ndim(y) == 0 else value


class EvModel(ABC):
    """Bivariate EV model with unit Frechet margins"""

    kind: ModelKind

    @abstractmethod
    def exponent(self, x, y) -> np.ndarray:
        """V(x, y)"""

    @abstractmethod
    def _log_conditional(self, y: np.ndarray, x: np.ndarray) -> np.ndarray:
        """log G(y | x) evaluated without forming exp(-V) and exp(1/x) separately"""

    @abstractmethod
    def _log_density(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def params(self) -> Dict[str, float]:
        pass

    @property
    def n_params(self) -> int:
        return len(self.params())

    @property
    def name(self) -> str:
        return self.kind.value

    def label(self) -> str:
        inner = ", ".join(f"{key}={value:.6g}" for key, value in self.params().items())
        return f"{self.name}({inner})"

    def joint_cdf(self, x, y):
        xa, ya = _as_pair(x, y)
        return _out(x, y, np.exp(-self.exponent(xa, ya)))

    def conditional_cdf(self, y, x):
        """G(y | x) = P(Y <= y | X = x)"""
        xa, ya = _as_pair(x, y)
        with np.errstate(over="ignore", under="ignore"):
            value = np.clip(np.exp(self._log_conditional(ya, xa)), 0.0, 1.0)
        return _out(x, y, value)

    def log_density(self, x, y):
        xa, ya = _as_pair(x, y)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            value = self._log_density(xa, ya)
        bad = np.flatnonzero(~np.isfinite(np.ravel(value)))
        if bad.size:
            i = int(bad[0])
            point = (float(np.ravel(xa)[i]), float(np.ravel(ya)[i]))
            raise NumericalError(f"non-finite log-density at {point}", index=i, point=point)
        return _out(x, y, value)


@dataclass(frozen=True)
class Logistic(EvModel):
    alpha: float
    kind: ModelKind = field(default=ModelKind.LOGISTIC, init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise DomainError(f"logistic alpha must lie in (0, 1], got {self.alpha}")

    def _log_s(self, lx, ly):
        return np.logaddexp(-lx / self.alpha, -ly / self.alpha)

    def exponent(self, x, y):
        xa, ya = _as_pair(x, y)
        return np.exp(self.alpha * self._log_s(np.log(xa), np.log(ya)))

    def _log_conditional(self, y, x):
        a = self.alpha
        lx, ly = np.log(x), np.log(y)
        # 1/x - V = -(1/x) expm1(a log(1 + (x/y)^(1/a)))
        inv_x_minus_v = -np.expm1(a * np.logaddexp(0.0, (lx - ly) / a)) / x
        return (a - 1.0) * self._log_s(lx, ly) + (1.0 - 1.0 / a) * lx + inv_x_minus_v

    def _log_density(self, x, y):
        a = self.alpha
        lx, ly = np.log(x), np.log(y)
        ls = self._log_s(lx, ly)
        v = np.exp(a * ls)
        return -v - (1.0 / a + 1.0) * (lx + ly) + (a - 2.0) * ls + np.log(v + (1.0 - a) / a)

    def params(self):
        return {"alpha": float(self.alpha)}


@dataclass(frozen=True)
class HuslerReiss(EvModel):
    lam: float
    kind: ModelKind = field(default=ModelKind.HUSLER_REISS, init=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"Husler-Reiss lambda must be positive, got {self.lam}")

    def _scores(self, lx, ly):
        lam = self.lam
        a = lam + (ly - lx) / (2.0 * lam)
        b = lam + (lx - ly) / (2.0 * lam)
        return a, b

    def exponent(self, x, y):
        xa, ya = _as_pair(x, y)
        a, b = self._scores(np.log(xa), np.log(ya))
        return special.ndtr(a) / xa + special.ndtr(b) / ya

    def _log_conditional(self, y, x):
        lam = self.lam
        a, b = self._scores(np.log(x), np.log(y))
        phi_a = np.exp(-0.5 * a * a - LOG_2PI_HALF)
        phi_b = np.exp(-0.5 * b * b - LOG_2PI_HALF)
        bracket = special.ndtr(a) + phi_a / (2.0 * lam) - (x / y) * phi_b / (2.0 * lam)
        inv_x_minus_v = special.ndtr(-a) / x - special.ndtr(b) / y
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(bracket, 0.0)) + inv_x_minus_v

    def _log_density(self, x, y):
        lam = self.lam
        lx, ly = np.log(x), np.log(y)
        a, b = self._scores(lx, ly)
        v = special.ndtr(a) / x + special.ndtr(b) / y
        smooth = special.log_ndtr(a) + special.log_ndtr(b) - 2.0 * lx - 2.0 * ly
        kink = -0.5 * a * a - LOG_2PI_HALF - np.log(2.0 * lam) - 2.0 * lx - ly
        return -v + np.logaddexp(smooth, kink)

    def params(self):
        return {"lambda": float(self.lam)}


@dataclass(frozen=True)
class ColesTawn(EvModel):
    alpha: float
    beta: float
    kind: ModelKind = field(default=ModelKind.COLES_TAWN, init=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0 and np.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f"Coles-Tawn alpha and beta must be positive, got ({self.alpha}, {self.beta})")

    def _q(self, x, y):
        """q = alpha x / (alpha x + beta y), returned with 1 - q"""
        ax = self.alpha * x
        by = self.beta * y
        total = ax + by
        return ax / total, by / total

    def _pieces(self, x, y):
        a, b = self.alpha, self.beta
        q, one_minus_q = self._q(x, y)
        upper_b1 = special.betainc(b, a + 1.0, one_minus_q)  # 1 - Be(q; a + 1, b)
        b1 = special.betainc(a + 1.0, b, q)
        b2 = special.betainc(a, b + 1.0, q)
        return q, one_minus_q, upper_b1, b1, b2

    def exponent(self, x, y):
        xa, ya = _as_pair(x, y)
        _, _, upper_b1, _, b2 = self._pieces(xa, ya)
        return upper_b1 / xa + b2 / ya

    def _beta_pdf(self, q, one_minus_q, a, b):
        with np.errstate(divide="ignore"):
            return np.exp((a - 1.0) * np.log(q) + (b - 1.0) * np.log(one_minus_q) - special.betaln(a, b))

    def _log_conditional(self, y, x):
        a, b = self.alpha, self.beta
        q, one_minus_q, upper_b1, b1, b2 = self._pieces(x, y)
        gamma = a / y + b / x
        bracket = (
            upper_b1
            + (a + 1.0) * b / gamma * self._beta_pdf(q, one_minus_q, a + 2.0, b + 1.0)
            - (x / y) * a * (b + 1.0) / gamma * self._beta_pdf(q, one_minus_q, a + 1.0, b + 2.0)
        )
        inv_x_minus_v = b1 / x - b2 / y
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(bracket, 0.0)) + inv_x_minus_v

    def _log_density(self, x, y):
        a, b = self.alpha, self.beta
        lx, ly = np.log(x), np.log(y)
        q, one_minus_q, upper_b1, _, b2 = self._pieces(x, y)
        v = upper_b1 / x + b2 / y
        log_d = np.log(a / y + b / x)
        log_be = (a * np.log(q) + (b - 1.0) * np.log(one_minus_q) - special.betaln(a + 1.0, b))
        smooth = np.log(upper_b1) + np.log(b2) - 2.0 * lx - 2.0 * ly
        kink = np.log(a * b) + log_be - 3.0 * lx - 2.0 * ly - 2.0 * log_d
        return -v + np.logaddexp(smooth, kink)

    def params(self):
        return {"alpha": float(self.alpha), "beta": float(self.beta)}


@dataclass(frozen=True)
class SemiparamLn(EvModel):
    spectral: LnSpectral
    rule: Optional[GaussQuadRule] = field(default=None, compare=False)
    kind: ModelKind = field(default=ModelKind.SEMIPARAM_LN, init=False, repr=False)

    def __post_init__(self):
        if self.spectral.mu != 0.0:
            raise DomainError("the semiparametric model requires mu = 0 (mean constraint)")
        if self.rule is None:
            object.__setattr__(self, "rule", GaussQuadRule.default())

    @classmethod
    def with_sigma(cls, sigma: float, rule: Optional[GaussQuadRule] = None) -> "SemiparamLn":
        return cls(LnSpectral(float(sigma)), rule)

    def exponent(self, x, y):
        xa, ya = _as_pair(x, y)
        parts = exponent_parts(xa, ya, self.spectral, self.rule.count)
        return 2.0 * parts.upper / xa + 2.0 * parts.comp / ya

    def _log_conditional(self, y, x):
        parts = exponent_parts(x, y, self.spectral, self.rule.count)
        # 1/x - V = 2 lower / x - 2 comp / y under the mean constraint
        with np.errstate(divide="ignore"):
            return np.log(2.0 * parts.upper) + 2.0 * parts.lower / x - 2.0 * parts.comp / y

    def _log_density(self, x, y):
        return ln_log_density(x, y, self.spectral, self.rule.count)

    def params(self):
        return {"sigma": float(self.spectral.sigma)}


PARAM_NAMES = {
    ModelKind.LOGISTIC: ("alpha",),
    ModelKind.HUSLER_REISS: ("lambda",),
    ModelKind.COLES_TAWN: ("alpha", "beta"),
    ModelKind.SEMIPARAM_LN: ("sigma",),
}


def parse_kind(kind) -> ModelKind:
    if isinstance(kind, ModelKind):
        return kind
    try:
        return ModelKind(str(kind).lower())
    except ValueError:
        raise ValidationError(f"unknown model '{kind}'. Available: {[k.value for k in ModelKind]}")


def build_model(kind, params: Dict[str, float], rule: Optional[GaussQuadRule] = None) -> EvModel:
    """Construct a model from its kind and a parameter dict"""
    kind = parse_kind(kind)
    expected = set(PARAM_NAMES[kind])
    given = {key for key, value in params.items() if value is not None}
    if given != expected:
        raise ValidationError(f"model '{kind.value}' requires parameters {sorted(expected)}, got {sorted(given)}")
    if kind == ModelKind.LOGISTIC:
        return Logistic(float(params["alpha"]))
    if kind == ModelKind.HUSLER_REISS:
        return HuslerReiss(float(params["lambda"]))
    if kind == ModelKind.COLES_TAWN:
        return ColesTawn(float(params["alpha"]), float(params["beta"]))
    return SemiparamLn.with_sigma(float(params["sigma"]), rule)


def joint_cdf(model: EvModel, x, y):
    return model.joint_cdf(x, y)


def conditional_cdf(model: EvModel, y, x):
    return model.conditional_cdf(y, x)


def log_density(model: EvModel, x, y):
    return model.log_density(x, y)


def extremal_coefficient(model: EvModel) -> float:
    """V(1, 1): 1 under perfect dependence, 2 under independence"""
    return float(model.exponent(1.0, 1.0))


def mixed_partial_fd(model: EvModel, x: float, y: float, rel_step: float = 1e-4) -> float:
    """Central-difference mixed partial of the joint CDF"""
    hx, hy = rel_step * x, rel_step * y
    g = model.joint_cdf
    return (g(x + hx, y + hy) - g(x + hx, y - hy) - g(x - hx, y + hy) + g(x - hx, y - hy)) / (4.0 * hx * hy)


def conditional_cdf_fd(model: EvModel, y: float, x: float, rel_step: float = 1e-5) -> float:
    """[dG/dx] / f_X(x) by central differences, f_X(x) = x^-2 exp(-1/x)"""
    h = rel_step * x
    dg = (model.joint_cdf(x + h, y) - model.joint_cdf(x - h, y)) / (2.0 * h)
    return dg / (x ** -2 * np.exp(-1.0 / x))


def density_crosscheck(model: EvModel, x: float, y: float, tolerance: float = 1e-4) -> float:
    """Relative gap between the analytic density and finite differences; logged when above tolerance"""
    analytic = float(np.exp(model.log_density(x, y)))
    numeric = mixed_partial_fd(model, x, y)
    gap = abs(analytic - numeric) / max(abs(numeric), 1e-300)
    if gap > tolerance:
        logger.warning("Analytic density disagrees with finite differences",
                       extra={"model": model.label(), "x": x, "y": y, "relative_gap": gap})
    return gap


# --- sampling ----------------------------------------------------------------

def sample_pairs(model: EvModel, n: int, seed: int, solver_cfg=None) -> Tuple[FrechetSample, FrechetSample]:
    """X by inversion, then Y by inverting the conditional CDF at a uniform draw"""
    from evmanifold.app.core.manifold import SolverConfig, solve_conditional_quantiles

    if n < 1:
        raise ValidationError(f"sample size must be positive, got {n}")
    rng = stream(seed, "sample_pairs")
    u = rng.uniform(size=(2, n))
    x = -1.0 / np.log(u[0])
    y = solve_conditional_quantiles(model, u[1], x, solver_cfg or SolverConfig(), stage="sample_pairs")
    return FrechetSample.from_values(x), FrechetSample.from_values(y)


@dataclass(frozen=True)
class SimScenario:
    model: EvModel
    n: int = 2000
    trend_amp: float = 1.0
    season_amp: float = 0.5
    seed: int = 7
    freq: str = "week"
    start: str = "1970-01-01"

    def __post_init__(self):
        if self.n < 100:
            raise ValidationError(f"scenario needs at least 100 pairs, got {self.n}")
        if self.trend_amp < 0 or self.season_amp < 0:
            raise ValidationError("trend and season amplitudes must be non-negative")
        if self.freq not in SIM_FREQS:
            raise ValidationError(f"freq must be one of {sorted(SIM_FREQS)}, got {self.freq!r}")


SIM_FREQS = {"day": "D", "week": "7D", "month": "MS", "year": "YS"}


def simulate_scenario(s: SimScenario) -> Tuple[UniSeries, UniSeries]:
    """Stationary EV pairs on the uniform scale exp(-1/Z), plus linear trend and annual sinusoid"""
    x, y = sample_pairs(s.model, s.n, s.seed)
    times = pd.date_range(start=s.start, periods=s.n, freq=SIM_FREQS[s.freq])
    doy = times.dayofyear.to_numpy(dtype=float)
    drift = s.trend_amp * np.arange(s.n, dtype=float) / (s.n - 1)
    season = s.season_amp * np.sin(2.0 * np.pi * doy / 365.25)

    series = []
    for sample in (x, y):
        base = np.exp(-1.0 / sample.values)
        series.append(UniSeries(times.to_numpy(), base + drift + season))

    logger.info("Scenario simulated", extra={"model": s.model.label(), "n": s.n, "seed": s.seed})
    return series[0], series[1]


# --- parametric competitor fits ----------------------------------------------

def _total_loglik(model: EvModel, x: FrechetSample, y: FrechetSample) -> float:
    try:
        return float(np.sum(model.log_density(x.values, y.values)))
    except (NumericalError, DomainError):
        return -np.inf


def fit_family(kind, x: FrechetSample, y: FrechetSample) -> Tuple[EvModel, float]:
    """Maximum-likelihood fit of a parametric family on a Frechet-scale sample"""
    kind = parse_kind(kind)
    if len(x) != len(y) or len(x) == 0:
        raise ValidationError("fit_family needs equal-length, non-empty samples")

    if kind == ModelKind.LOGISTIC:
        objective = lambda a: -_total_loglik(Logistic(float(a)), x, y)
        res = optimize.minimize_scalar(objective, bounds=(0.01, 1.0), method="bounded",
                                       options={"xatol": 1e-8})
        model = Logistic(float(res.x))
    elif kind == ModelKind.HUSLER_REISS:
        objective = lambda t: -_total_loglik(HuslerReiss(float(np.exp(t))), x, y)
        grid = np.linspace(np.log(1e-3), np.log(1e2), 31)
        scan = [objective(t) for t in grid]
        best = int(np.argmin(scan))
        res = optimize.minimize_scalar(
            objective, bounds=(grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]),
            method="bounded", options={"xatol": 1e-8},
        )
        model = HuslerReiss(float(np.exp(res.x)))
    elif kind == ModelKind.COLES_TAWN:
        def objective(theta):
            a, b = np.exp(np.clip(theta, np.log(1e-3), np.log(1e3)))
            return -_total_loglik(ColesTawn(float(a), float(b)), x, y)

        best_res = None
        for start in ((0.0, 0.0), (np.log(0.5), np.log(10.0)), (np.log(5.0), np.log(5.0))):
            res = optimize.minimize(objective, np.array(start), method="Nelder-Mead",
                                    options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 2000})
            if best_res is None or res.fun < best_res.fun:
                best_res = res
        res = best_res
        a, b = np.exp(np.clip(res.x, np.log(1e-3), np.log(1e3)))
        model = ColesTawn(float(a), float(b))
    else:
        raise ValidationError("the semiparametric model is fitted by fit_sigma_mle")

    loglik = _total_loglik(model, x, y)
    if not np.isfinite(loglik):
        raise FitError(f"{kind.value} fit produced a non-finite log-likelihood", stage="fit_family")
    logger.info("Parametric family fitted", extra={"model": model.label(), "loglik": loglik})
    return model, loglik
