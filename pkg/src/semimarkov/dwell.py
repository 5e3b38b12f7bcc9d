"""Parametric dwell-time distribution families: densities, MLE, BIC selection,
and seeded sampling.

Four families are supported.  Parameterizations (all times in seconds):

* ``Exponential``: mean ``mu``; f(x) = (1/mu) exp(-x/mu), x >= 0.
* ``GeneralizedExtremeValue``: shape ``k``, scale ``sigma``, location ``mu``;
  f(x) = (1/sigma) t(x)^(k+1) exp(-t(x)) with t(x) = (1 + k (x-mu)/sigma)^(-1/k).
  Here k > 0 means a heavy upper tail (note: scipy's `genextreme` uses the
  opposite sign for the shape).
* ``GeneralizedPareto``: shape ``k``, scale ``sigma``, location fixed at 0;
  f(x) = (1/sigma) (1 + k x/sigma)^(-1/k - 1).  For k < 0 the support is the
  bounded interval [0, -sigma/k].
* ``InverseGaussian``: mean ``mu``, shape ``lambda``;
  f(x) = sqrt(lambda / (2 pi x^3)) exp(-lambda (x-mu)^2 / (2 mu^2 x)), x > 0.

Log densities return -inf outside the support rather than truncating.
Numerical fits (GEV, GPD) use a derivative-free simplex search and are
accepted only if the central-finite-difference gradient of the log-likelihood
at the solution has norm <= 1e-4 * max(1, |LL|).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import log_ndtr, ndtr

from .errors import (
    AllFitsFailedError,
    DegenerateDataError,
    EmptyInputError,
    FitDidNotConvergeError,
    MinimumDwellWarning,
    NonPositiveDurationError,
    TooFewObservationsError,
)

logger = logging.getLogger(__name__)

EXPONENTIAL = "Exponential"
GEV = "GeneralizedExtremeValue"
GPD = "GeneralizedPareto"
INVERSE_GAUSSIAN = "InverseGaussian"

#: Default candidate families, in canonical tag order (used for tie-breaking).
FAMILIES = (EXPONENTIAL, GEV, GPD, INVERSE_GAUSSIAN)

N_PARAMS = {EXPONENTIAL: 1, GEV: 3, GPD: 2, INVERSE_GAUSSIAN: 2}
PARAM_NAMES = {
    EXPONENTIAL: ("mu",),
    GEV: ("k", "sigma", "mu"),
    GPD: ("k", "sigma"),
    INVERSE_GAUSSIAN: ("mu", "lambda"),
}

# Shape magnitudes below this are evaluated with the k -> 0 limit form.
_SHAPE_EPS = 1e-13
# Minimum observations for the numerically fitted families (GEV, GPD).
_MIN_NUMERIC_OBS = 8
# Simplex search budget and the stationarity certificate tolerance.
_MAX_ITER = 2000
_PARAM_TOL = 1e-8
_GRAD_TOL = 1e-4
_EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class DwellFit:
    """A fitted (or analytically specified) dwell-time distribution.

    ``truncation_s`` shifts the support: the fit models ``truncation_s + X``
    where X follows the stated family.  It is nonzero only for left-truncated
    exponential tail fits.  ``fallback`` marks fits produced by the
    exponential-only downgrade path after every candidate family failed.
    """

    family: str
    params: dict[str, float]
    n_obs: int = 0
    log_likelihood: float | None = None
    bic: float | None = None
    truncation_s: float = 0.0
    fallback: bool = False

    def __post_init__(self) -> None:
        _validate_params(self.family, self.params)

    @property
    def n_params(self) -> int:
        return N_PARAMS[self.family]


def _validate_params(family: str, params: dict[str, float]) -> None:
    if family not in N_PARAMS:
        raise ValueError(f"unknown dwell family {family!r}")
    expected = set(PARAM_NAMES[family])
    if set(params) != expected:
        raise ValueError(
            f"{family} expects parameters {sorted(expected)}, got {sorted(params)}"
        )
    if family == EXPONENTIAL and not params["mu"] > 0:
        raise ValueError("Exponential mu must be positive")
    if family in (GEV, GPD) and not params["sigma"] > 0:
        raise ValueError(f"{family} sigma must be positive")
    if family == INVERSE_GAUSSIAN:
        if not params["mu"] > 0 or not params["lambda"] > 0:
            raise ValueError("InverseGaussian mu and lambda must be positive")


# --- densities, CDFs, quantiles ---------------------------------------------


def log_pdf(family: str, params: dict[str, float], x: float) -> float:
    """Natural-log density at x (seconds).  Returns -inf outside the support."""
    _validate_params(family, params)
    if family == EXPONENTIAL:
        mu = params["mu"]
        if x < 0:
            return -math.inf
        return -math.log(mu) - x / mu
    if family == GEV:
        k, sigma, mu = params["k"], params["sigma"], params["mu"]
        z = (x - mu) / sigma
        if abs(k) < _SHAPE_EPS:
            return -math.log(sigma) - z - math.exp(-z)
        w = 1.0 + k * z
        if w <= 0.0:
            return -math.inf
        lw = math.log(w)
        return -math.log(sigma) - (1.0 + 1.0 / k) * lw - math.exp(-lw / k)
    if family == GPD:
        k, sigma = params["k"], params["sigma"]
        if x < 0:
            return -math.inf
        z = x / sigma
        if abs(k) < _SHAPE_EPS:
            return -math.log(sigma) - z
        w = 1.0 + k * z
        if w <= 0.0:
            return -math.inf
        return -math.log(sigma) - (1.0 + 1.0 / k) * math.log(w)
    # InverseGaussian
    mu, lam = params["mu"], params["lambda"]
    if x <= 0:
        return -math.inf
    return 0.5 * (math.log(lam) - math.log(2.0 * math.pi) - 3.0 * math.log(x)) - (
        lam * (x - mu) ** 2
    ) / (2.0 * mu * mu * x)


def cdf(family: str, params: dict[str, float], x: float) -> float:
    """Cumulative distribution function at x."""
    _validate_params(family, params)
    if family == EXPONENTIAL:
        if x <= 0:
            return 0.0
        return -math.expm1(-x / params["mu"])
    if family == GEV:
        k, sigma, mu = params["k"], params["sigma"], params["mu"]
        z = (x - mu) / sigma
        if abs(k) < _SHAPE_EPS:
            return math.exp(-math.exp(-z))
        w = 1.0 + k * z
        if w <= 0.0:
            return 0.0 if k > 0 else 1.0
        return math.exp(-math.exp(-math.log(w) / k))
    if family == GPD:
        k, sigma = params["k"], params["sigma"]
        if x <= 0:
            return 0.0
        z = x / sigma
        if abs(k) < _SHAPE_EPS:
            return -math.expm1(-z)
        w = 1.0 + k * z
        if w <= 0.0:  # above the upper endpoint when k < 0
            return 1.0
        return -math.expm1(-math.log(w) / k)
    # InverseGaussian
    mu, lam = params["mu"], params["lambda"]
    if x <= 0:
        return 0.0
    s = math.sqrt(lam / x)
    a = s * (x / mu - 1.0)
    b = s * (x / mu + 1.0)
    return float(ndtr(a) + math.exp(2.0 * lam / mu + log_ndtr(-b)))


def quantile(family: str, params: dict[str, float], u: float) -> float:
    """Inverse CDF at u in (0, 1).

    Closed form for Exponential, GEV, and GPD; numerical inversion of the
    CDF for InverseGaussian.
    """
    _validate_params(family, params)
    if not 0.0 < u < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {u}")
    if family == EXPONENTIAL:
        return -params["mu"] * math.log1p(-u)
    if family == GEV:
        k, sigma, mu = params["k"], params["sigma"], params["mu"]
        g = math.log(-math.log(u))  # ln(-ln u)
        if abs(k) < _SHAPE_EPS:
            return mu - sigma * g
        return mu + sigma * math.expm1(-k * g) / k
    if family == GPD:
        k, sigma = params["k"], params["sigma"]
        if abs(k) < _SHAPE_EPS:
            return -sigma * math.log1p(-u)
        return sigma * math.expm1(-k * math.log1p(-u)) / k
    # InverseGaussian: strictly increasing CDF, bracket then root-find
    mu = params["mu"]
    lo, hi = mu * 1e-12, mu
    while cdf(family, params, hi) < u:
        hi *= 2.0
        if hi > mu * 1e18:  # pragma: no cover - unreachable for valid u
            raise ArithmeticError("failed to bracket InverseGaussian quantile")
    while cdf(family, params, lo) > u:
        lo *= 0.5
    return float(
        brentq(lambda x: cdf(family, params, x) - u, lo, hi, xtol=1e-300, rtol=8.9e-16,
               maxiter=200)
    )


def dwell_log_pdf(fit: DwellFit, x: float) -> float:
    """Log density of a DwellFit at x, honoring any left truncation shift."""
    return log_pdf(fit.family, fit.params, x - fit.truncation_s)


# --- vectorized log-likelihoods (used by the fitters and certificates) ------


def _exp_loglik(mu: float, xs: np.ndarray) -> float:
    return float(-len(xs) * math.log(mu) - xs.sum() / mu)


def _gev_loglik(k: float, sigma: float, mu: float, xs: np.ndarray) -> float:
    if sigma <= 0:
        return -math.inf
    z = (xs - mu) / sigma
    n = len(xs)
    if abs(k) < _SHAPE_EPS:
        val = -n * math.log(sigma) - z.sum() - np.exp(-z).sum()
        return float(val) if np.isfinite(val) else -math.inf
    w = 1.0 + k * z
    if w.min() <= 0.0:
        return -math.inf
    lw = np.log(w)
    val = -n * math.log(sigma) - (1.0 + 1.0 / k) * lw.sum() - np.exp(-lw / k).sum()
    return float(val) if np.isfinite(val) else -math.inf


def _gpd_loglik(k: float, sigma: float, xs: np.ndarray) -> float:
    if sigma <= 0:
        return -math.inf
    n = len(xs)
    z = xs / sigma
    if abs(k) < _SHAPE_EPS:
        return float(-n * math.log(sigma) - z.sum())
    w = 1.0 + k * z
    if w.min() <= 0.0:
        return -math.inf
    val = -n * math.log(sigma) - (1.0 + 1.0 / k) * np.log(w).sum()
    return float(val) if np.isfinite(val) else -math.inf


def _ig_loglik(mu: float, lam: float, xs: np.ndarray) -> float:
    n = len(xs)
    val = 0.5 * (n * (math.log(lam) - math.log(2.0 * math.pi)) - 3.0 * np.log(xs).sum())
    val -= (lam * ((xs - mu) ** 2 / xs).sum()) / (2.0 * mu * mu)
    return float(val)


def _loglik(family: str, theta: np.ndarray, xs: np.ndarray) -> float:
    """Log-likelihood in natural parameters, ordered as PARAM_NAMES[family]."""
    if family == EXPONENTIAL:
        return _exp_loglik(theta[0], xs)
    if family == GEV:
        return _gev_loglik(theta[0], theta[1], theta[2], xs)
    if family == GPD:
        return _gpd_loglik(theta[0], theta[1], xs)
    return _ig_loglik(theta[0], theta[1], xs)


def bic(log_likelihood: float, n_params: int, n_obs: int) -> float:
    """Bayesian Information Criterion: n_params * ln(n_obs) - 2 * LL (lower wins)."""
    if n_obs < 1:
        raise ValueError("n_obs must be at least 1")
    if n_params < 0:
        raise ValueError("n_params must be non-negative")
    return n_params * math.log(n_obs) - 2.0 * log_likelihood


# --- stationarity certificate ------------------------------------------------


def _fd_gradient_norm(family: str, theta: np.ndarray, xs: np.ndarray) -> float:
    """Central finite-difference gradient norm of the log-likelihood."""
    grad = np.zeros(len(theta))
    for i in range(len(theta)):
        h = 1e-5 * max(1.0, abs(theta[i]))
        for _ in range(4):
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            lp, lm = _loglik(family, tp, xs), _loglik(family, tm, xs)
            if math.isfinite(lp) and math.isfinite(lm):
                grad[i] = (lp - lm) / (2.0 * h)
                break
            h *= 0.1  # step crossed a support boundary; shrink
        else:
            return math.inf
    return float(np.linalg.norm(grad))


def _certify(family: str, theta: np.ndarray, xs: np.ndarray, ll: float) -> bool:
    return _fd_gradient_norm(family, theta, xs) <= _GRAD_TOL * max(1.0, abs(ll))


# --- closed-form fits --------------------------------------------------------


def _as_duration_array(xs, minimum: float = 0.0) -> np.ndarray:
    arr = np.asarray(xs, dtype=float)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size == 0:
        raise EmptyInputError("no durations supplied")
    if np.any(arr <= minimum):
        raise NonPositiveDurationError(
            f"durations must exceed {minimum}; min was {arr.min()}"
        )
    return arr


def fit_exponential(xs, truncation_s: float = 0.0) -> DwellFit:
    """Closed-form exponential MLE, optionally left-truncated at truncation_s.

    With truncation c, fits the shifted model c + Exponential(mu) to the
    observations above c: mu-hat = mean(x - c).
    """
    if truncation_s < 0:
        raise ValueError("truncation_s must be non-negative")
    arr = _as_duration_array(xs, minimum=truncation_s)
    shifted = arr - truncation_s
    mu = float(shifted.mean())
    ll = _exp_loglik(mu, shifted)
    return DwellFit(
        family=EXPONENTIAL,
        params={"mu": mu},
        n_obs=len(arr),
        log_likelihood=ll,
        bic=bic(ll, 1, len(arr)),
        truncation_s=truncation_s,
    )


def fit_inverse_gaussian(xs) -> DwellFit:
    """Closed-form inverse-Gaussian MLE: mu = mean, lambda = n / sum(1/x - 1/mu)."""
    arr = _as_duration_array(xs)
    n = len(arr)
    if n < 2:
        raise TooFewObservationsError("inverse-Gaussian fit needs at least 2 observations")
    mu = float(arr.mean())
    denom = float((1.0 / arr).sum() - n / mu)
    if denom <= 0.0 or not math.isfinite(denom):
        raise DegenerateDataError("all observations equal; lambda is undefined")
    lam = n / denom
    ll = _ig_loglik(mu, lam, arr)
    return DwellFit(
        family=INVERSE_GAUSSIAN,
        params={"mu": mu, "lambda": lam},
        n_obs=n,
        log_likelihood=ll,
        bic=bic(ll, 2, n),
    )


# --- numerical fits ----------------------------------------------------------


def _simplex_fit(nll, x0: np.ndarray) -> np.ndarray:
    # nll returns inf outside the support; silence the resulting inf-inf
    # chatter inside the simplex bookkeeping
    with np.errstate(invalid="ignore"):
        res = minimize(
            nll,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": _MAX_ITER,
                "xatol": _PARAM_TOL,
                "fatol": 1e-9,
                "adaptive": True,
            },
        )
    return np.asarray(res.x, dtype=float)


def fit_gev(xs) -> DwellFit:
    """MLE of the generalized extreme value family by simplex search.

    Initialized from Gumbel method-of-moments; the result is accepted only
    if the finite-difference stationarity certificate holds (one restart
    from a perturbed initialization before giving up).
    """
    arr = _as_duration_array(xs, minimum=-math.inf)
    n = len(arr)
    if n < _MIN_NUMERIC_OBS:
        raise TooFewObservationsError(
            f"GEV fit needs at least {_MIN_NUMERIC_OBS} observations, got {n}"
        )
    s = float(arr.std(ddof=1))
    if s == 0.0:
        raise FitDidNotConvergeError("observations carry no spread")
    sigma0 = s * math.sqrt(6.0) / math.pi
    mu0 = float(arr.mean()) - _EULER_GAMMA * sigma0
    inits = [np.array([0.1, math.log(sigma0), mu0])]
    inits.append(inits[0] + np.array([0.2, 0.1, 0.05 * s]))

    def nll(t):
        val = _gev_loglik(t[0], math.exp(t[1]), t[2], arr)
        return -val if math.isfinite(val) else math.inf

    for x0 in inits:
        t = _simplex_fit(nll, x0)
        theta = np.array([t[0], math.exp(t[1]), t[2]])
        ll = _gev_loglik(*theta, arr)
        if math.isfinite(ll) and _certify(GEV, theta, arr, ll):
            return DwellFit(
                family=GEV,
                params={"k": float(theta[0]), "sigma": float(theta[1]), "mu": float(theta[2])},
                n_obs=n,
                log_likelihood=ll,
                bic=bic(ll, 3, n),
            )
    raise FitDidNotConvergeError("GEV fit failed its stationarity certificate")


def fit_gpd(xs) -> DwellFit:
    """MLE of the generalized Pareto family (location fixed at 0).

    For k < 0 the support constraint sigma > -k * max(x) is enforced through
    the likelihood (out-of-support parameters score -inf).
    """
    arr = _as_duration_array(xs)
    n = len(arr)
    if n < _MIN_NUMERIC_OBS:
        raise TooFewObservationsError(
            f"GPD fit needs at least {_MIN_NUMERIC_OBS} observations, got {n}"
        )
    m = float(arr.mean())
    v = float(arr.var(ddof=1))
    if v == 0.0:
        raise FitDidNotConvergeError("observations carry no spread")
    k0 = 0.5 * (1.0 - m * m / v)
    sigma0 = m * (1.0 - k0)
    inits = [np.array([k0, math.log(sigma0)])]
    inits.append(inits[0] + np.array([0.2, 0.1]))

    def nll(t):
        val = _gpd_loglik(t[0], math.exp(t[1]), arr)
        return -val if math.isfinite(val) else math.inf

    for x0 in inits:
        t = _simplex_fit(nll, x0)
        theta = np.array([t[0], math.exp(t[1])])
        ll = _gpd_loglik(*theta, arr)
        if math.isfinite(ll) and _certify(GPD, theta, arr, ll):
            return DwellFit(
                family=GPD,
                params={"k": float(theta[0]), "sigma": float(theta[1])},
                n_obs=n,
                log_likelihood=ll,
                bic=bic(ll, 2, n),
            )
    raise FitDidNotConvergeError("GPD fit failed its stationarity certificate")


_FITTERS = {
    EXPONENTIAL: fit_exponential,
    GEV: fit_gev,
    GPD: fit_gpd,
    INVERSE_GAUSSIAN: fit_inverse_gaussian,
}

_SKIPPABLE = (
    EmptyInputError,
    NonPositiveDurationError,
    DegenerateDataError,
    TooFewObservationsError,
    FitDidNotConvergeError,
)


def fit_all_families(
    xs, candidates=FAMILIES
) -> tuple[dict[str, DwellFit], dict[str, str]]:
    """Fit every candidate family, returning (fits, skip reasons)."""
    fits: dict[str, DwellFit] = {}
    skipped: dict[str, str] = {}
    for family in candidates:
        if family not in _FITTERS:
            raise ValueError(f"unknown dwell family {family!r}")
        try:
            fits[family] = _FITTERS[family](xs)
        except _SKIPPABLE as exc:
            skipped[family] = f"{type(exc).__name__}: {exc}"
            logger.debug("skipping %s: %s", family, skipped[family])
    return fits, skipped


def select_family(xs, candidates=FAMILIES) -> DwellFit:
    """Fit the candidates and return the fit with minimal BIC.

    Candidates whose preconditions fail (or whose fit does not converge) are
    skipped.  Ties break toward fewer parameters, then canonical tag order.
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    fits, skipped = fit_all_families(xs, candidates)
    if not fits:
        raise AllFitsFailedError(f"no candidate family could be fitted: {skipped}")
    return min(
        fits.values(),
        key=lambda f: (f.bic, f.n_params, FAMILIES.index(f.family)),
    )


# --- sampling ----------------------------------------------------------------


def _sample_inverse_gaussian(mu: float, lam: float, rng) -> float:
    # transformation with root selection (chi-square of a standard normal)
    nu = rng.standard_normal()
    y = nu * nu
    x = mu + (mu * mu * y) / (2.0 * lam) - (mu / (2.0 * lam)) * math.sqrt(
        4.0 * mu * lam * y + (mu * y) ** 2
    )
    if rng.random() <= mu / (mu + x):
        return x
    return mu * mu / x


def sample_dwell(fit: DwellFit, rng, min_seconds: float = 0.0) -> float:
    """Draw one dwell time (seconds) from a fitted distribution.

    Inverse-CDF sampling for the closed-form families; the transformation
    method for InverseGaussian.  Draws that are non-positive or below
    ``min_seconds`` (one sample period, during simulation) are rejected and
    redrawn; after 1000 attempts the minimum is returned with a warning.
    """
    attempts = 1000
    for _ in range(attempts):
        if fit.family == INVERSE_GAUSSIAN:
            x = _sample_inverse_gaussian(fit.params["mu"], fit.params["lambda"], rng)
        else:
            x = quantile(fit.family, fit.params, rng.random())
        x += fit.truncation_s
        if x > 0.0 and x >= min_seconds:
            return x
    floor = min_seconds if min_seconds > 0.0 else 1e-12
    warnings.warn(
        f"dwell sampling for {fit.family} hit the rejection bound; "
        f"returning minimum {floor} s",
        MinimumDwellWarning,
        stacklevel=2,
    )
    return floor
