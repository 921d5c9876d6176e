"""Fitted values, h-step forecasts, in-sample intervals and bootstrap
prediction intervals for fitted MARMA models.

Beyond the sample the recursion uses Y_t = mu_t and r_t = 0 for point
forecasts.  Bootstrap paths instead draw Y_t from the fitted Matsuoka law and
set r_t = g(Y_t) - g(mu_t).
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats

from . import core, distribution, links
from .estimation import require_stderr
from .exceptions import DimensionError, DomainError, NonFiniteError, ValidationError

logger = logging.getLogger(__name__)

MIN_BOOT = 50


@dataclass(frozen=True, eq=False)
class ForecastResult:
    horizon: int
    point: np.ndarray
    boot: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None
    level: float = None
    seed: int = None
    clamp_count: int = 0

    @property
    def has_intervals(self):
        return self.boot is not None

    @property
    def boot_mean(self):
        return None if self.boot is None else self.boot.mean(axis=0)

    @property
    def boot_median(self):
        return None if self.boot is None else np.median(self.boot, axis=0)

    def to_frame(self):
        """Columns step, point, lower, upper (NaN bounds without a bootstrap)."""
        nan = np.full(self.horizon, np.nan)
        return pd.DataFrame(
            {
                "step": np.arange(1, self.horizon + 1),
                "point": self.point,
                "lower": nan if self.lower is None else self.lower,
                "upper": nan if self.upper is None else self.upper,
            }
        )


def harmonic_covariates(t, terms):
    """Deterministic harmonic covariates evaluated at times ``t``.

    ``terms`` is a sequence of ``(kind, period)`` pairs with kind ``"sin"``
    or ``"cos"``; each gives the column ``sin(2 pi t / period)`` (resp. cos).
    ``("sin", 100)`` is sin(pi t / 50); ``("sin", 12)`` and ``("cos", 12)``
    give annual seasonality for monthly data.
    """
    t = np.asarray(t, dtype=float)
    columns = []
    for kind, period in terms:
        if kind not in ("sin", "cos"):
            raise DomainError(f"Harmonic kind must be 'sin' or 'cos', got {kind!r}.")
        if period <= 0:
            raise DomainError(f"Harmonic period must be positive, got {period}.")
        func = np.sin if kind == "sin" else np.cos
        columns.append(func(2.0 * np.pi * t / period))
    if not columns:
        return np.zeros((t.size, 0))
    return np.column_stack(columns)


@dataclass(frozen=True, eq=False)
class _History:
    gy: np.ndarray
    xb: np.ndarray
    r: np.ndarray
    xb0: float

    @property
    def n(self):
        return self.gy.size


def _history(gamma, data, spec):
    filtered = core.filter_series(gamma, data, spec, derivatives=False)
    x0 = core._presample_x(data.x, spec.p_ar)
    return _History(
        gy=spec.link.g(data.y),
        xb=data.x @ gamma.beta,
        r=filtered.resid_r,
        xb0=float(x0 @ gamma.beta),
    )


def _future_xb(gamma, spec, new_x, h):
    if h < 1:
        raise DomainError(f"Forecast horizon must be at least 1, got {h}.")
    if spec.r_cov == 0:
        return np.zeros(h)
    if new_x is None:
        raise ValidationError(
            f"{spec} has {spec.r_cov} covariates; future covariate rows are required."
        )
    new_x = np.asarray(new_x, dtype=float)
    if new_x.ndim == 1:
        new_x = new_x[:, None]
    if new_x.shape[0] < h or new_x.shape[1] != spec.r_cov:
        raise DimensionError(
            f"Need a {h} x {spec.r_cov} matrix of future covariates, got {new_x.shape}."
        )
    return new_x[:h] @ gamma.beta


def _extend(gamma, spec, hist, xb_future, draws=None):
    """Run the recursion for t = n+1..n+h.

    ``draws`` (h x m standard Gamma(3/2) variates) switches from point
    forecasting to m bootstrap paths.  Returns ``(mu, y, clamps, clips)`` with
    h x m arrays; ``clips`` counts bootstrap draws pulled into the link band.
    """
    link = spec.link
    n, h = hist.n, xb_future.size
    m = 1 if draws is None else draws.shape[1]
    mu_f = np.empty((h, m))
    y_f = np.empty((h, m))
    gy_f = np.empty((h, m))
    r_f = np.zeros((h, m))
    clamps = clips = 0

    def gy_at(s):
        return 0.0 if s < 0 else (hist.gy[s] if s < n else gy_f[s - n])

    def xb_at(s):
        return hist.xb0 if s < 0 else (hist.xb[s] if s < n else xb_future[s - n])

    def r_at(s):
        return 0.0 if s < 0 else (hist.r[s] if s < n else r_f[s - n])

    for k in range(h):
        s = n + k
        eta = gamma.alpha + xb_future[k]
        for i, phi_i in enumerate(gamma.phi, start=1):
            eta = eta + phi_i * (gy_at(s - i) - xb_at(s - i))
        for j, theta_j in enumerate(gamma.theta, start=1):
            eta = eta + theta_j * r_at(s - j)
        eta = np.broadcast_to(eta, (m,))
        if not np.all(np.isfinite(eta)):
            raise NonFiniteError(f"Forecast linear predictor is not finite at t={s + 1}.", index=s + 1)
        mu, c = link.g_inv(eta, return_clamps=True)
        clamps += c
        mu_f[k] = mu
        if draws is None:
            y_f[k] = mu
            gy_f[k] = link.g(mu)
        else:
            y_f[k], c = links.clip_to_band(
                distribution.from_standard_gamma(draws[k], distribution.mean_to_shape(mu))
            )
            clips += c
            gy_f[k] = link.g(y_f[k])
            r_f[k] = gy_f[k] - link.g(mu)
    return mu_f, y_f, clamps, clips


def fitted_values(fit, data, spec=None):
    """In-sample forecasts mu_1..mu_n at the fitted parameters."""
    spec = spec or fit.spec
    return core.filter_series(fit.gamma_hat, data, spec, derivatives=False).mu


def _warn_if_not_converged(fit):
    if not getattr(fit, "converged", True):
        logger.warning("Forecasting from a fit that did not converge.")
        warnings.warn(
            "Forecasting from a fit that did not converge; results may be unreliable.",
            RuntimeWarning,
            stacklevel=3,
        )


def predict(fit, data, spec=None, new_x=None, h=1):
    """Point forecasts mu_{n+1..n+h}."""
    spec = spec or fit.spec
    _warn_if_not_converged(fit)
    gamma = fit.gamma_hat
    xb_future = _future_xb(gamma, spec, new_x, h)
    mu_f, _, clamps, _ = _extend(gamma, spec, _history(gamma, data, spec), xb_future)
    return ForecastResult(horizon=h, point=mu_f[:, 0], clamp_count=clamps)


def insample_interval(fit, data, spec=None, t=None, level=0.05):
    """Delta-method interval for mu_t, 1 <= t <= n (all t when None).

    Half width is ``z_{1-level/2} sqrt(Z_t' Cov Z_t) / g'(mu_t)`` with Z_t the
    row of d eta_t / d gamma and Cov the inverse conditional information.
    Returns ``(lower, upper)`` clipped into (0,1).
    """
    spec = spec or fit.spec
    if not 0 < level <= 1:
        raise DomainError(f"level must lie in (0,1], got {level}.")
    require_stderr(fit)
    filtered = core.filter_series(fit.gamma_hat, data, spec)
    rows = np.arange(data.n) if t is None else np.atleast_1d(np.asarray(t)) - 1
    if np.any(rows < 0) or np.any(rows >= data.n):
        raise DomainError(f"Time index must lie in 1..{data.n}, got {t!r}.")
    cov = np.nan_to_num(fit.cov, nan=0.0)
    z_rows = filtered.deriv[rows]
    var_eta = np.einsum("ij,jk,ik->i", z_rows, cov, z_rows)
    mu = filtered.mu[rows]
    half = stats.norm.ppf(1.0 - level / 2.0) * np.sqrt(np.maximum(var_eta, 0.0)) / spec.link.g_prime(mu)
    lower = np.clip(mu - half, links.EPS, 1.0 - links.EPS)
    upper = np.clip(mu + half, links.EPS, 1.0 - links.EPS)
    if t is not None and np.ndim(t) == 0:
        return float(lower[0]), float(upper[0])
    return lower, upper


def _gamma_block(children, h):
    return np.column_stack(
        [np.random.default_rng(child).standard_gamma(distribution.GAMMA_SHAPE, size=h) for child in children]
    )


def _standard_gamma_paths(seed, m, h, threads=1):
    """h x m standard Gamma(3/2) draws; path b uses substream b of ``seed``.

    The result does not depend on ``threads``.
    """
    children = np.random.SeedSequence(seed).spawn(m)
    blocks = [[children[b] for b in idx] for idx in np.array_split(np.arange(m), max(1, min(threads, m)))]
    if threads > 1:
        parts = Parallel(n_jobs=threads, prefer="threads")(
            delayed(_gamma_block)(block, h) for block in blocks
        )
    else:
        parts = [_gamma_block(block, h) for block in blocks]
    return np.hstack(parts)


def empirical_interval(paths, level):
    """Per-step (level/2, 1 - level/2) sample quantiles, linear interpolation."""
    lower, upper = np.quantile(paths, [level / 2.0, 1.0 - level / 2.0], axis=0, method="linear")
    return lower, upper


def bootstrap_intervals(fit, data, spec=None, new_x=None, h=1, m=500, level=0.05, seed=0, threads=1):
    """Bootstrap prediction intervals for Y_{n+1..n+h}.

    Simulates ``m`` future paths from the fitted model and takes per-step
    empirical quantiles.  Deterministic given ``seed`` at any ``threads``.
    Clamped bootstrap means are counted in ``clamp_count``, not fatal.
    """
    spec = spec or fit.spec
    if m < MIN_BOOT:
        raise DomainError(f"Need at least {MIN_BOOT} bootstrap paths, got {m}.")
    if not 0 < level < 1:
        raise DomainError(f"level must lie in (0,1), got {level}.")
    _warn_if_not_converged(fit)
    gamma = fit.gamma_hat
    xb_future = _future_xb(gamma, spec, new_x, h)
    hist = _history(gamma, data, spec)

    point, _, _, _ = _extend(gamma, spec, hist, xb_future)
    draws = _standard_gamma_paths(seed, m, h, threads=threads)
    _, y_paths, clamps, clips = _extend(gamma, spec, hist, xb_future, draws=draws)
    if clamps:
        warnings.warn(f"{clamps} bootstrap means hit the link clamp.", RuntimeWarning)
    if clips:
        logger.debug("Clipped %d bootstrap draws into the link band.", clips)

    boot = y_paths.T
    lower, upper = empirical_interval(boot, level)
    logger.debug("Bootstrap: h=%d, m=%d, seed=%s, clamps=%d", h, m, seed, clamps)
    return ForecastResult(
        horizon=h,
        point=point[:, 0],
        boot=boot,
        lower=lower,
        upper=upper,
        level=level,
        seed=seed,
        clamp_count=clamps,
    )


def accuracy_measures(actual, predicted, last_observed=None):
    """RMSE, MAPE (percent) and mean directional accuracy.

    Direction at step k compares ``actual[k] - actual[k-1]`` with
    ``predicted[k] - actual[k-1]``; ``last_observed`` supplies ``actual[-1]``
    for the first step of an out-of-sample forecast.
    """
    actual = np.asarray(actual, dtype=float).ravel()
    predicted = np.asarray(predicted, dtype=float).ravel()
    if actual.shape != predicted.shape or actual.size == 0:
        raise DimensionError("actual and predicted must be nonempty and of equal length.")
    err = actual - predicted
    out = {
        "rmse": float(np.sqrt(np.mean(err**2))),
        "mape": float(100.0 * np.mean(np.abs(err / actual))),
    }
    previous = actual[:-1]
    act, pred = actual[1:], predicted[1:]
    if last_observed is not None:
        previous = np.concatenate([[last_observed], previous])
        act, pred = actual, predicted
    if act.size:
        out["mda"] = float(np.mean(np.sign(act - previous) == np.sign(pred - previous)))
    else:
        out["mda"] = float("nan")
    return out
