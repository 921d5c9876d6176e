"""Residuals, normality tests, Wald tests and confidence intervals."""

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.stats.diagnostic import lilliefors, normal_ad

from . import core, distribution
from .estimation import require_stderr
from .exceptions import DomainError, InsufficientDataError

CDF_CLAMP = 1e-12
MIN_TEST_LENGTH = 8
NULLS = ("composite", "simple")


@dataclass(frozen=True, eq=False)
class ResidualSet:
    simple: np.ndarray
    quantile: np.ndarray
    clamp_count: int = 0


@dataclass(frozen=True)
class HypothesisTest:
    statistic: float
    p_value: float


@dataclass(frozen=True, eq=False)
class AcfResult:
    acf: np.ndarray
    band: float

    @property
    def outside(self):
        """Lags >= 1 whose autocorrelation leaves the +/- band."""
        return np.flatnonzero(np.abs(self.acf[1:]) > self.band) + 1


def quantile_residuals(y, shape):
    """Phi^-1 of the Matsuoka CDF, clamped away from 0 and 1.

    Returns ``(residuals, n_clamped)``.
    """
    u = np.asarray(distribution.cdf(y, shape), dtype=float)
    clamped = (u < CDF_CLAMP) | (u > 1.0 - CDF_CLAMP)
    u = np.clip(u, CDF_CLAMP, 1.0 - CDF_CLAMP)
    return stats.norm.ppf(u), int(np.count_nonzero(clamped))


def residuals(fit, data, spec=None):
    """Simple residuals Y_t - mu_t and quantile residuals at the fitted shapes."""
    spec = spec or fit.spec
    filtered = fit.filtered
    if filtered is None or filtered.mu.size != data.n:
        filtered = core.filter_series(fit.gamma_hat, data, spec, derivatives=False)
    qres, clamps = quantile_residuals(data.y, filtered.shape)
    if clamps:
        warnings.warn(f"{clamps} CDF values clamped before the normal quantile.", RuntimeWarning)
    return ResidualSet(simple=data.y - filtered.mu, quantile=qres, clamp_count=clamps)


def _check_length(z, null="composite"):
    if null not in NULLS:
        raise DomainError(f"null must be one of {', '.join(NULLS)}, got {null!r}.")
    z = np.asarray(z, dtype=float).ravel()
    if z.size < MIN_TEST_LENGTH:
        raise InsufficientDataError(
            f"Normality tests need at least {MIN_TEST_LENGTH} values, got {z.size}."
        )
    return z


def ks_normality(z, null="composite"):
    """Kolmogorov-Smirnov test of normality.

    ``null="composite"`` estimates mean and variance (Lilliefors);
    ``null="simple"`` tests the fully specified N(0,1).
    """
    z = _check_length(z, null)
    if null == "simple":
        res = stats.kstest(z, "norm")
        return HypothesisTest(float(res.statistic), float(res.pvalue))
    statistic, p_value = lilliefors(z, dist="norm", pvalmethod="table")
    return HypothesisTest(float(statistic), float(p_value))


def _ad_limit_cdf(a2):
    """Limiting null CDF of the Anderson-Darling statistic (Marsaglia & Marsaglia)."""
    if a2 <= 0:
        return 0.0
    if a2 < 2:
        poly = 2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * a2) * a2) * a2) * a2) * a2
        return a2**-0.5 * np.exp(-1.2337141 / a2) * poly
    inner = 1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * a2) * a2) * a2) * a2) * a2
    return np.exp(-np.exp(inner))


def ad_normality(z, null="composite"):
    """Anderson-Darling test of normality.

    The composite null estimates mean and variance and uses the
    small-sample corrected p-value; the simple null tests N(0,1) with the
    limiting distribution.
    """
    z = _check_length(z, null)
    if null == "composite":
        statistic, p_value = normal_ad(z)
        return HypothesisTest(float(statistic), float(np.clip(p_value, 0.0, 1.0)))
    z = np.sort(z)
    n = z.size
    log_cdf = stats.norm.logcdf(z)
    log_sf = stats.norm.logsf(z)
    i = np.arange(1, n + 1)
    a2 = -n - np.sum((2 * i - 1) * (log_cdf + log_sf[::-1])) / n
    p_value = float(np.clip(1.0 - _ad_limit_cdf(a2), 0.0, 1.0))
    return HypothesisTest(float(a2), p_value)


def _index(fit, j):
    names = fit.names()
    if isinstance(j, str):
        if j not in names:
            raise DomainError(f"Unknown parameter {j!r}; have {', '.join(names)}.")
        return names.index(j)
    if not 0 <= j < len(names):
        raise DomainError(f"Parameter index {j} out of range.")
    return int(j)


def wald_test(fit, j, gamma_star=0.0):
    """Wald z test of H0: gamma_j = gamma_star; ``j`` is an index or a label."""
    stderr = require_stderr(fit)
    j = _index(fit, j)
    z = (fit.gamma_hat.to_array()[j] - gamma_star) / stderr[j]
    return HypothesisTest(float(z), float(2.0 * stats.norm.sf(abs(z))))


def confint(fit, level=0.05):
    """Per-parameter intervals gamma_hat +/- z_{1 - level/2} stderr."""
    if not 0 < level < 1:
        raise DomainError(f"level must lie in (0,1), got {level}.")
    stderr = require_stderr(fit)
    est = fit.gamma_hat.to_array()
    half = stats.norm.ppf(1.0 - level / 2.0) * stderr
    return pd.DataFrame(
        {"lower": est - half, "upper": est + half},
        index=pd.Index(fit.names(), name="parameter"),
    )


def residual_acf(z, max_lag):
    """Sample autocorrelations for lags 0..max_lag with the 1.96/sqrt(n) band."""
    z = np.asarray(z, dtype=float).ravel()
    n = z.size
    if max_lag < 1 or max_lag >= n / 2:
        raise DomainError(f"max_lag must lie in [1, n/2), got {max_lag} for n={n}.")
    d = z - z.mean()
    denom = d @ d
    if denom == 0:
        raise InsufficientDataError("Autocorrelations of a constant sequence are undefined.")
    acf = np.array([d[k:] @ d[: n - k] for k in range(max_lag + 1)]) / denom
    return AcfResult(acf=acf, band=1.96 / np.sqrt(n))


def _normality_summary(test, z, null):
    if z.size < MIN_TEST_LENGTH:
        return {
            "statistic": None,
            "p_value": None,
            "skipped": f"need at least {MIN_TEST_LENGTH} values, got {z.size}",
        }
    result = test(z, null)
    return {"statistic": result.statistic, "p_value": result.p_value, "null": null}


def diagnose(fit, data, max_lag=20, null="composite"):
    """Summary of residual diagnostics, ready for JSON.

    Series too short for the normality tests or the ACF get a ``skipped``
    reason in place of the numbers.
    """
    res = residuals(fit, data)
    max_lag = min(max_lag, (data.n - 1) // 2)
    if max_lag >= 1:
        acf = residual_acf(res.simple, max_lag)
        acf_summary = {
            "values": acf.acf.tolist(),
            "band": acf.band,
            "lags_outside_band": acf.outside.tolist(),
        }
    else:
        acf_summary = {"values": None, "skipped": f"need at least 3 values, got {data.n}"}
    return {
        "n": data.n,
        "simple_residuals": {
            "mean": float(res.simple.mean()),
            "sd": float(res.simple.std(ddof=1)) if data.n > 1 else None,
        },
        "quantile_residuals": {
            "mean": float(res.quantile.mean()),
            "sd": float(res.quantile.std(ddof=1)) if data.n > 1 else None,
            "clamped": res.clamp_count,
        },
        "ks": _normality_summary(ks_normality, res.quantile, null),
        "ad": _normality_summary(ad_normality, res.quantile, null),
        "acf": acf_summary,
    }
