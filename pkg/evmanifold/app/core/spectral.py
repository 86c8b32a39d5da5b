"""
Logistic-Normal spectral density on [0, 1] and its integrals.

Every integral against h uses w = expit(sigma z + mu) with z standard
normal. Full-line expectations use Gauss-Hermite nodes; integrals over one
side of the angle w* use Gauss-Legendre nodes on the z window [c, Z] (or
[-Z, c]), split where the logistic factor turns, with Z = 10.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, special, stats

from evmanifold.app.core.manifold_exceptions import (
    DataError, DomainError, FitError, InsufficientExceedancesError, QuadratureError
)
from evmanifold.app.core.margins import FrechetSample
from evmanifold.app.utilities.telemetry import get_logger

logger = get_logger("spectral")

Z_CUT = 10.0
REFINE_RTOL = 1e-8
LOG_2PI_HALF = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class GaussQuadRule:
    """Gauss-Hermite rule; weights sum to sqrt(pi)"""
    nodes: np.ndarray
    weights: np.ndarray
    count: int

    @classmethod
    def hermite(cls, count: int) -> "GaussQuadRule":
        if count < 2:
            raise DomainError(f"quadrature needs at least 2 nodes, got {count}")
        nodes, weights = np.polynomial.hermite.hermgauss(int(count))
        return cls(nodes, weights, int(count))

    @classmethod
    def default(cls) -> "GaussQuadRule":
        from evmanifold.app.config import settings
        return _cached_rule(settings.quad_nodes)

    def refined(self) -> "GaussQuadRule":
        return _cached_rule(2 * self.count)

    def expect(self, f) -> np.ndarray:
        """E[f(Z)] for Z standard normal; f maps an array of nodes to values on the last axis"""
        return f(np.sqrt(2.0) * self.nodes) @ (self.weights / np.sqrt(np.pi))


@lru_cache(maxsize=8)
def _cached_rule(count: int) -> GaussQuadRule:
    return GaussQuadRule.hermite(count)


@lru_cache(maxsize=8)
def _legendre(count: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(int(count))


@dataclass(frozen=True)
class LnSpectral:
    sigma: float
    mu: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"spectral sigma must be positive, got {self.sigma}")
        if not np.isfinite(self.mu):
            raise DomainError(f"spectral mu must be finite, got {self.mu}")


@dataclass(frozen=True, eq=False)
class PseudoAngles:
    w: np.ndarray
    r: np.ndarray
    u: float
    k: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"w": self.w, "r": self.r})


@dataclass(frozen=True, eq=False)
class PosteriorBand:
    draws: np.ndarray  # post burn-in sigma draws
    w_grid: np.ndarray
    h_mean: np.ndarray
    h_lo: np.ndarray
    h_hi: np.ndarray
    acceptance: float

    @property
    def sigma_mean(self) -> float:
        return float(np.mean(self.draws))

    def sigma_interval(self, level: float = 0.95) -> Tuple[float, float]:
        tail = (1.0 - level) / 2.0
        lo, hi = np.quantile(self.draws, [tail, 1.0 - tail])
        return float(lo), float(hi)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"w": self.w_grid, "h_mean": self.h_mean, "h_lo": self.h_lo, "h_hi": self.h_hi})


# --- density and moments -----------------------------------------------------

def ln_density(w, m: LnSpectral):
    """h(w) = exp(-(logit w - mu)^2 / 2 sigma^2) / (sigma sqrt(2 pi) w (1 - w)); zero at the endpoints"""
    wa = np.asarray(w, dtype=float)
    if np.any(~((wa >= 0) & (wa <= 1))):
        raise DomainError(f"spectral density is defined on [0, 1], got {w}")
    out = np.zeros_like(wa)
    inner = (wa > 0) & (wa < 1)
    wi = wa[inner]
    z = (np.log(wi) - np.log1p(-wi) - m.mu) / m.sigma
    out[inner] = np.exp(-0.5 * z * z - LOG_2PI_HALF - np.log(m.sigma) - np.log(wi) - np.log1p(-wi))
    return float(out) if np.ndim(w) == 0 else out


def _refine_check(coarse: float, fine: float, what: str) -> float:
    if abs(coarse - fine) > REFINE_RTOL * abs(fine) + 1e-14:
        raise QuadratureError(
            f"{what}: quadrature refinement disagrees ({coarse!r} vs {fine!r})", stage="quadrature"
        )
    return fine


def spectral_moment(m: LnSpectral, rule: Optional[GaussQuadRule] = None, check: bool = True) -> float:
    """Integral of w h(w) over [0, 1]; equals 1/2 exactly when mu = 0"""
    rule = rule or GaussQuadRule.default()
    if rule.count < 16:
        raise DomainError(f"spectral moments need at least 16 nodes, got {rule.count}")
    value = float(rule.expect(lambda z: special.expit(m.sigma * z + m.mu)))
    if check:
        fine = float(rule.refined().expect(lambda z: special.expit(m.sigma * z + m.mu)))
        _refine_check(value, fine, "spectral moment")
    return value


def odds_moment(m: LnSpectral, rule: Optional[GaussQuadRule] = None) -> float:
    """E[w / (1 - w)] = exp(mu + sigma^2 / 2)"""
    rule = rule or GaussQuadRule.default()
    return float(rule.expect(lambda z: np.exp(m.sigma * z + m.mu)))


def _segment(a: np.ndarray, b: np.ndarray, f, count: int) -> np.ndarray:
    """Row-wise Gauss-Legendre integral of f over [a_i, b_i]; empty rows give 0"""
    x, wts = _legendre(count)
    half = 0.5 * np.maximum(b - a, 0.0)
    mid = 0.5 * (a + b)
    z = mid[..., None] + half[..., None] * x
    return (f(z) @ wts) * half


def upper_expit_integral(c, sigma: float, shift: float, count: int) -> np.ndarray:
    """E[expit(sigma Z + shift) 1{Z > c}]"""
    c = np.clip(np.asarray(c, dtype=float), -Z_CUT, Z_CUT)
    turn = float(np.clip(-shift / sigma, -Z_CUT, Z_CUT))
    f = lambda z: special.expit(sigma * z + shift) * np.exp(-0.5 * z * z - LOG_2PI_HALF)
    left = _segment(c, np.maximum(c, turn), f, count)
    right = _segment(np.maximum(c, turn), np.full_like(c, Z_CUT), f, count)
    return left + right


def lower_expit_integral(c, sigma: float, shift: float, count: int) -> np.ndarray:
    """E[expit(sigma Z + shift) 1{Z < c}]"""
    c = np.clip(np.asarray(c, dtype=float), -Z_CUT, Z_CUT)
    turn = float(np.clip(-shift / sigma, -Z_CUT, Z_CUT))
    f = lambda z: special.expit(sigma * z + shift) * np.exp(-0.5 * z * z - LOG_2PI_HALF)
    left = _segment(np.full_like(c, -Z_CUT), np.minimum(c, turn), f, count)
    right = _segment(np.minimum(c, turn), c, f, count)
    return left + right


@dataclass(frozen=True, eq=False)
class ExponentParts:
    """Pieces of V(x, y) under the Logistic-Normal spectral density.

    upper: integral of w h over [w*, 1]; lower: integral of w h over [0, w*];
    comp: integral of (1 - w) h over [0, w*]; c: the normal score of w*.
    """
    upper: np.ndarray
    lower: np.ndarray
    comp: np.ndarray
    c: np.ndarray


def exponent_parts(x, y, m: LnSpectral, count: int) -> ExponentParts:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = (np.log(x) - np.log(y) - m.mu) / m.sigma
    upper = upper_expit_integral(c, m.sigma, m.mu, count)
    lower = lower_expit_integral(c, m.sigma, m.mu, count)
    # (1 - expit(s)) = expit(-s); reflect z -> -z
    comp = upper_expit_integral(-c, m.sigma, -m.mu, count)
    return ExponentParts(upper, lower, comp, c)


def _check_positive(x, y) -> None:
    if np.any(~(np.asarray(x, dtype=float) > 0)) or np.any(~(np.asarray(y, dtype=float) > 0)):
        raise DomainError(f"Frechet-scale arguments must be positive, got x={x}, y={y}")


def _v_from_parts(x, y, parts: ExponentParts) -> np.ndarray:
    return 2.0 * parts.upper / np.asarray(x, dtype=float) + 2.0 * parts.comp / np.asarray(y, dtype=float)


def exponent_integral(x, y, m: LnSpectral, rule: Optional[GaussQuadRule] = None, check: bool = True):
    """V(x, y) = 2 * integral of max(w/x, (1-w)/y) h(w), split at w* = x/(x+y)"""
    _check_positive(x, y)
    rule = rule or GaussQuadRule.default()
    value = _v_from_parts(x, y, exponent_parts(x, y, m, rule.count))
    if check:
        fine = _v_from_parts(x, y, exponent_parts(x, y, m, 2 * rule.count))
        for coarse_i, fine_i in zip(np.ravel(value), np.ravel(fine)):
            _refine_check(float(coarse_i), float(fine_i), "exponent measure")
    return float(value) if np.ndim(value) == 0 else value


def tail_weight_integral(wstar, m: LnSpectral, rule: Optional[GaussQuadRule] = None, check: bool = True):
    """Integral of w h(w) over [w*, 1]"""
    rule = rule or GaussQuadRule.default()
    wa = np.asarray(wstar, dtype=float)
    if np.any(~((wa >= 0) & (wa <= 1))):
        raise DomainError(f"w* must lie in [0, 1], got {wstar}")

    def compute(count: int) -> np.ndarray:
        out = np.zeros_like(wa)
        inner = (wa > 0) & (wa < 1)
        wi = wa[inner]
        c = (np.log(wi) - np.log1p(-wi) - m.mu) / m.sigma
        out[inner] = upper_expit_integral(c, m.sigma, m.mu, count)
        if np.any(wa == 0):
            out[wa == 0] = spectral_moment(m, _cached_rule(count), check=False)
        return out

    value = compute(rule.count)
    if check:
        fine = compute(2 * rule.count)
        for coarse_i, fine_i in zip(np.ravel(value), np.ravel(fine)):
            _refine_check(float(coarse_i), float(fine_i), "tail weight")
    return float(value) if np.ndim(wstar) == 0 else value


# --- likelihood --------------------------------------------------------------

def ln_log_density(x, y, m: LnSpectral, count: int) -> np.ndarray:
    """log of the mixed partial of exp(-V) under the Logistic-Normal spectral density"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    parts = exponent_parts(x, y, m, count)
    lx, ly = np.log(x), np.log(y)
    v = _v_from_parts(x, y, parts)
    with np.errstate(divide="ignore"):
        smooth = np.log(4.0) + np.log(parts.upper) + np.log(parts.comp) - 2.0 * lx - 2.0 * ly
    log_phi = -0.5 * parts.c ** 2 - LOG_2PI_HALF
    kink = np.log(2.0) + log_phi - np.log(m.sigma) - lx - ly - np.logaddexp(lx, ly)
    return -v + np.logaddexp(smooth, kink)


def log_likelihood(sigma: float, x: FrechetSample, y: FrechetSample, rule: Optional[GaussQuadRule] = None) -> float:
    rule = rule or GaussQuadRule.default()
    ll = ln_log_density(x.values, y.values, LnSpectral(sigma), rule.count)
    total = float(np.sum(ll))
    return total if np.isfinite(total) else -np.inf


def _paired(x: FrechetSample, y: FrechetSample) -> None:
    if len(x) != len(y):
        raise DataError(f"paired samples differ in length: {len(x)} vs {len(y)}")
    if len(x) == 0:
        raise DataError("paired samples are empty")


def extract_pseudo_angles(
    x: FrechetSample,
    y: FrechetSample,
    quantile_level: float = 0.98,
    *,
    threshold: Optional[float] = None,
    min_exceedances: Optional[int] = 10,
) -> PseudoAngles:
    """Radius r = x + y, angle w = x / r, kept where r exceeds the empirical radius quantile"""
    _paired(x, y)
    if not 0 < quantile_level < 1:
        raise DomainError(f"quantile level must lie in (0, 1), got {quantile_level}")
    r = x.values + y.values
    w = x.values / r
    u = float(np.quantile(r, quantile_level)) if threshold is None else float(threshold)
    keep = r > u
    k = int(np.count_nonzero(keep))
    if min_exceedances is not None and k < min_exceedances:
        raise InsufficientExceedancesError(
            f"only {k} pairs exceed the radius threshold {u:.6g}; at least {min_exceedances} required",
            stage="pseudo_angles",
        )
    logger.info("Single global radius threshold used for pseudo-angles",
                extra={"u": u, "k": k, "quantile_level": quantile_level})
    return PseudoAngles(w=w[keep], r=r[keep], u=u, k=k)


def select_covariate_exceedances(
    x: FrechetSample,
    y: FrechetSample,
    level: float = 0.9,
    *,
    min_exceedances: Optional[int] = 10,
) -> Tuple[FrechetSample, FrechetSample]:
    """Pairs whose x exceeds its empirical ``level`` quantile.

    The selection only involves the covariate, whose unit Frechet law does not
    depend on the dependence parameter, so the log density summed over the
    kept pairs is the conditional log-likelihood of y given a large x up to a
    constant.
    """
    _paired(x, y)
    if not 0 < level < 1:
        raise DomainError(f"covariate level must lie in (0, 1), got {level}")
    u = float(np.quantile(x.values, level))
    keep = x.values > u
    k = int(np.count_nonzero(keep))
    if min_exceedances is not None and k < min_exceedances:
        raise InsufficientExceedancesError(
            f"only {k} pairs have x above its {level:g} quantile {u:.6g}; at least {min_exceedances} required",
            stage="pseudo_angles",
        )
    logger.debug("Covariate exceedances selected for the fit", extra={"u": u, "k": k, "level": level})
    return FrechetSample(x.values[keep], x.source_ranks[keep]), FrechetSample(y.values[keep], y.source_ranks[keep])


def fit_sigma_mle(
    x: FrechetSample,
    y: FrechetSample,
    bounds: Tuple[float, float] = (0.01, 100.0),
    rule: Optional[GaussQuadRule] = None,
    grid_points: int = 25,
) -> Tuple[float, float]:
    """Coarse scan over log sigma, then a bounded Brent search around the best grid point"""
    _paired(x, y)
    lo, hi = float(bounds[0]), float(bounds[1])
    if not 0 < lo < hi:
        raise DomainError(f"sigma bounds must satisfy 0 < lower < upper, got {bounds}")
    rule = rule or GaussQuadRule.default()

    def negll(log_sigma: float) -> float:
        value = log_likelihood(float(np.exp(log_sigma)), x, y, rule)
        return -value if np.isfinite(value) else np.inf

    grid = np.linspace(np.log(lo), np.log(hi), grid_points)
    scan = np.array([negll(g) for g in grid])
    finite = np.isfinite(scan)
    if not np.any(finite):
        raise FitError("log-likelihood is not finite anywhere on the sigma grid", stage="fit_sigma")
    spread = np.max(scan[finite]) - np.min(scan[finite])
    if spread <= 1e-8 * (1.0 + abs(np.min(scan[finite]))):
        raise FitError(
            f"flat likelihood: log-likelihood varies by {spread:.3g} over sigma in [{lo}, {hi}]",
            stage="fit_sigma",
        )

    best = int(np.nanargmin(np.where(finite, scan, np.nan)))
    left = grid[max(best - 1, 0)]
    right = grid[min(best + 1, grid.size - 1)]
    res = optimize.minimize_scalar(negll, bounds=(left, right), method="bounded",
                                   options={"xatol": 1e-7, "maxiter": 200})
    if not res.success or not np.isfinite(res.fun):
        raise FitError(f"sigma optimisation did not converge: {res.message}", stage="fit_sigma")

    log_sigma, value = (res.x, res.fun) if res.fun <= scan[best] else (grid[best], scan[best])
    sigma_hat = float(np.exp(log_sigma))
    loglik = float(-value)

    fine = log_likelihood(sigma_hat, x, y, rule.refined())
    if abs(fine - loglik) > REFINE_RTOL * abs(fine) + 1e-7:
        raise QuadratureError(
            f"log-likelihood refinement disagrees at sigma={sigma_hat:.6g} ({loglik!r} vs {fine!r})",
            stage="fit_sigma",
        )
    if np.isclose(log_sigma, grid[0]) or np.isclose(log_sigma, grid[-1]):
        logger.warning("sigma estimate sits on a search bound", extra={"sigma": sigma_hat, "bounds": [lo, hi]})

    logger.info("Spectral sigma fitted", extra={"sigma": sigma_hat, "loglik": loglik, "n": len(x)})
    return sigma_hat, loglik


def sigma_posterior_band(
    x: FrechetSample,
    y: FrechetSample,
    iters: int = 10000,
    burnin: int = 4000,
    *,
    rng: np.random.Generator,
    sigma_start: float = 1.0,
    bounds: Tuple[float, float] = (0.01, 100.0),
    prior_sd: float = 1.5,
    step: float = 0.3,
    w_grid: Optional[np.ndarray] = None,
    rule: Optional[GaussQuadRule] = None,
) -> PosteriorBand:
    """Random-walk Metropolis on log sigma with a Normal(0, prior_sd^2) prior"""
    _paired(x, y)
    if iters <= burnin or burnin < 0:
        raise DomainError(f"iters ({iters}) must exceed burnin ({burnin})")
    rule = rule or GaussQuadRule.default()
    log_lo, log_hi = np.log(bounds[0]), np.log(bounds[1])

    def log_post(theta: float) -> float:
        if not log_lo <= theta <= log_hi:
            return -np.inf
        return log_likelihood(float(np.exp(theta)), x, y, rule) + stats.norm.logpdf(theta, 0.0, prior_sd)

    theta = float(np.clip(np.log(sigma_start), log_lo, log_hi))
    current = log_post(theta)
    if not np.isfinite(current):
        raise FitError(f"posterior is not finite at the starting sigma {sigma_start}", stage="posterior")

    proposals = rng.standard_normal(iters) * step
    uniforms = np.log(rng.uniform(size=iters))
    chain = np.empty(iters)
    accepted = 0
    for i in range(iters):
        candidate = theta + proposals[i]
        proposed = log_post(candidate)
        if uniforms[i] < proposed - current:
            theta, current = candidate, proposed
            accepted += 1
        chain[i] = theta

    acceptance = accepted / iters
    if not 0.1 <= acceptance <= 0.6:
        logger.warning("Metropolis acceptance rate outside [0.1, 0.6]",
                       extra={"acceptance": acceptance, "step": step})

    draws = np.exp(chain[burnin:])
    grid = np.linspace(0.005, 0.995, 199) if w_grid is None else np.asarray(w_grid, dtype=float)
    curves = np.vstack([ln_density(grid, LnSpectral(float(s))) for s in draws])
    h_lo, h_hi = np.quantile(curves, [0.025, 0.975], axis=0)

    logger.info("Posterior band computed", extra={
        "acceptance": acceptance, "draws": int(draws.size), "sigma_mean": float(draws.mean())
    })
    return PosteriorBand(draws=draws, w_grid=grid, h_mean=curves.mean(axis=0), h_lo=h_lo, h_hi=h_hi,
                         acceptance=acceptance)


def dirichlet_to_ln(alpha: Tuple[float, float]) -> Tuple[float, float]:
    """Moment-matched Logistic-Normal (mu, sigma^2) for a two-component Dirichlet"""
    a1, a2 = (float(a) for a in alpha)
    if not (a1 > 0 and a2 > 0):
        raise DomainError(f"Dirichlet parameters must be positive, got {alpha}")
    mu = float(special.digamma(a1) - special.digamma(a2))
    sigma2 = float(special.polygamma(1, a1) + special.polygamma(1, a2))
    return mu, sigma2
