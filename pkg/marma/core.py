"""Systematic component of MARMA(p,q) models and its likelihood.

The linear predictor follows

    eta_t = alpha + X_t'beta + sum_i phi_i [g(Y_{t-i}) - X_{t-i}'beta]
                  + sum_j theta_j r_{t-j},       r_t = g(Y_t) - eta_t,

with pre-sample conventions g(Y_t) = 0, X_t = mean of the first p covariate
rows and r_t = 0 for t < 1.  Substituting r_t turns the moving-average part
into a linear recursion in eta, so both eta and its derivatives are computed
with :func:`scipy.signal.lfilter`.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import links
from .distribution import mean_to_shape, neg_log
from .exceptions import DimensionError, DomainError, NonFiniteError

_LOG_CONST = np.log(2.0) - 0.5 * np.log(np.pi)


@dataclass(frozen=True)
class ModelSpec:
    """Orders and link of a MARMA(p,q) model with r covariates."""

    p_ar: int = 0
    q_ma: int = 0
    r_cov: int = 0
    link: links.LinkSpec = field(default_factory=links.LinkSpec)

    def __post_init__(self):
        for name in ("p_ar", "q_ma", "r_cov"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise DimensionError(f"{name} must be a nonnegative integer, got {value!r}.")
        object.__setattr__(self, "link", links.as_link(self.link))

    @property
    def n_params(self):
        return 1 + self.r_cov + self.p_ar + self.q_ma

    def names(self):
        """Canonical parameter labels in (alpha, beta, phi, theta) order."""
        return (
            ["alpha"]
            + [f"beta_{i}" for i in range(1, self.r_cov + 1)]
            + [f"phi_{i}" for i in range(1, self.p_ar + 1)]
            + [f"theta_{i}" for i in range(1, self.q_ma + 1)]
        )

    def __str__(self):
        cov = f", r={self.r_cov}" if self.r_cov else ""
        return f"MARMA({self.p_ar},{self.q_ma}{cov}, link={self.link})"


@dataclass(frozen=True, eq=False)
class ParamVector:
    """gamma = (alpha, beta, phi, theta)."""

    alpha: float
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        for name in ("beta", "phi", "theta"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if not np.all(np.isfinite(self.to_array())):
            raise DomainError("Parameter vector must be finite.")

    @classmethod
    def from_array(cls, values, spec):
        values = np.asarray(values, dtype=float).ravel()
        if values.size != spec.n_params:
            raise DimensionError(
                f"{spec} has {spec.n_params} parameters, got a vector of length {values.size}."
            )
        r, p = spec.r_cov, spec.p_ar
        return cls(values[0], values[1 : 1 + r], values[1 + r : 1 + r + p], values[1 + r + p :])

    def to_array(self):
        return np.concatenate([[self.alpha], self.beta, self.phi, self.theta])

    def check(self, spec):
        if (self.beta.size, self.phi.size, self.theta.size) != (spec.r_cov, spec.p_ar, spec.q_ma):
            raise DimensionError(
                f"Parameter layout (r={self.beta.size}, p={self.phi.size}, q={self.theta.size}) "
                f"does not match {spec}."
            )
        return self

    def as_dict(self, spec):
        return dict(zip(spec.names(), self.to_array().tolist()))

    def __repr__(self):
        return (
            f"ParamVector(alpha={self.alpha!r}, beta={self.beta.tolist()}, "
            f"phi={self.phi.tolist()}, theta={self.theta.tolist()})"
        )


@dataclass(frozen=True, eq=False)
class SeriesData:
    """Observations y_1..y_n in (0,1) with an n x r covariate matrix."""

    y: np.ndarray
    x: np.ndarray = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if y.size == 0:
            raise DimensionError("Series is empty.")
        bad = np.flatnonzero(~((y > 0) & (y < 1)))
        if bad.size:
            raise DomainError(f"Observations must lie strictly inside (0,1); first offender at t={bad[0] + 1}.")
        x = np.zeros((y.size, 0)) if self.x is None else np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != y.size:
            raise DimensionError(f"Covariates have {x.shape[0]} rows but the series has {y.size}.")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self):
        return self.y.size

    @property
    def r(self):
        return self.x.shape[1]

    def truncate(self, n):
        """First n observations."""
        return SeriesData(self.y[:n], self.x[:n])


@dataclass(frozen=True, eq=False)
class FilterOutput:
    eta: np.ndarray
    mu: np.ndarray
    shape: np.ndarray
    resid_r: np.ndarray
    deriv: np.ndarray
    clamp_count: int = 0
    clamped: np.ndarray = None


def _lag(values, lag, fill):
    """values[t - lag] with ``fill`` before the start (axis 0)."""
    out = np.empty_like(values)
    out[:lag] = fill
    out[lag:] = values[: max(values.shape[0] - lag, 0)]
    return out


def _presample_x(x, p_ar):
    if p_ar == 0 or x.shape[1] == 0:
        return np.zeros(x.shape[1])
    return x[:p_ar].mean(axis=0)


def _check_inputs(gamma, data, spec):
    if not isinstance(gamma, ParamVector):
        gamma = ParamVector.from_array(gamma, spec)
    gamma.check(spec)
    if data.r != spec.r_cov:
        raise DimensionError(f"Data carry {data.r} covariates but {spec} expects {spec.r_cov}.")
    return gamma


def _first_bad(values):
    bad = np.flatnonzero(~np.isfinite(values))
    return int(bad[0]) + 1 if bad.size else None


def _ma_filter(theta, values):
    """Solve z_t + sum_j theta_j z_{t-j} = values_t with zero initial state."""
    if theta.size == 0:
        return values
    return signal.lfilter([1.0], np.concatenate([[1.0], theta]), values, axis=0)


def filter_series(gamma, data, spec, derivatives=True):
    """Run the MARMA recursion at ``gamma`` over ``data``.

    Returns a :class:`FilterOutput` with eta, mu, the per-time Matsuoka shape,
    r_t = g(Y_t) - eta_t and, if ``derivatives``, the n x k matrix of
    d eta_t / d gamma.  A non-finite eta raises :class:`NonFiniteError`
    naming the first offending time.
    """
    gamma = _check_inputs(gamma, data, spec)
    link = spec.link
    gy = link.g(data.y)
    xb = data.x @ gamma.beta
    x0 = _presample_x(data.x, spec.p_ar)
    xb0 = float(x0 @ gamma.beta)

    ar_part = np.zeros(data.n)
    for i, phi_i in enumerate(gamma.phi, start=1):
        ar_part += phi_i * (_lag(gy, i, 0.0) - _lag(xb, i, xb0))
    lagged_gy = np.zeros(data.n)
    for j, theta_j in enumerate(gamma.theta, start=1):
        lagged_gy += theta_j * _lag(gy, j, 0.0)

    with np.errstate(over="ignore", invalid="ignore"):
        eta = _ma_filter(gamma.theta, gamma.alpha + xb + ar_part + lagged_gy)
    index = _first_bad(eta)
    if index is not None:
        raise NonFiniteError(f"Linear predictor is not finite at t={index}.", index=index)

    mu, clamps = link.g_inv(eta, return_clamps=True)
    resid_r = gy - eta

    deriv = None
    if derivatives:
        deriv = filter_derivatives(gamma, data, spec, gy=gy, xb=xb, resid_r=resid_r)

    return FilterOutput(
        eta=eta,
        mu=mu,
        shape=mean_to_shape(mu),
        resid_r=resid_r,
        deriv=deriv,
        clamp_count=clamps,
        clamped=links.clamp_mask(mu),
    )


def filter_derivatives(gamma, data, spec, gy=None, xb=None, resid_r=None):
    """Matrix D with D[t, j] = d eta_t / d gamma_j (pre-sample values 0)."""
    gamma = _check_inputs(gamma, data, spec)
    if gy is None or xb is None or resid_r is None:
        out = filter_series(gamma, data, spec, derivatives=False)
        gy, xb, resid_r = spec.link.g(data.y), data.x @ gamma.beta, out.resid_r
    x0 = _presample_x(data.x, spec.p_ar)
    xb0 = float(x0 @ gamma.beta)

    columns = [np.ones(data.n)]
    for col in range(spec.r_cov):
        xc = data.x[:, col]
        column = xc.copy()
        for i, phi_i in enumerate(gamma.phi, start=1):
            column -= phi_i * _lag(xc, i, x0[col])
        columns.append(column)
    for k in range(1, spec.p_ar + 1):
        columns.append(_lag(gy, k, 0.0) - _lag(xb, k, xb0))
    for s in range(1, spec.q_ma + 1):
        columns.append(_lag(resid_r, s, 0.0))

    with np.errstate(over="ignore", invalid="ignore"):
        return _ma_filter(gamma.theta, np.column_stack(columns))


def _one_minus_m(mu):
    """(m, 1 - m) with m = mu^(2/3), the second without cancellation."""
    log_m = (2.0 / 3.0) * np.log(mu)
    return np.exp(log_m), -np.expm1(log_m)


def loglik_terms(y, mu):
    """Per-observation partial log-likelihood written in terms of mu."""
    m, one_m = _one_minus_m(mu)
    log_y = -neg_log(y)
    return (
        _LOG_CONST
        + 0.5 * np.log(neg_log(y))
        + np.log(mu)
        - 1.5 * np.log(one_m)
        + (m / one_m - 1.0) * log_y
    )


def score_mu(y, mu):
    """h_t = d l_t / d mu_t."""
    m, one_m = _one_minus_m(mu)
    log_y = -neg_log(y)
    return 2.0 * log_y / (3.0 * one_m**2 * np.cbrt(mu)) + 1.0 / (one_m * mu)


def info_mu(mu):
    """Conditional variance of h_t, 2 / (3 (1 - mu^(2/3))^2 mu^2)."""
    _, one_m = _one_minus_m(mu)
    return 2.0 / (3.0 * one_m**2 * mu**2)


def loglik(gamma, data, spec, filtered=None):
    """Partial log-likelihood; a non-finite term raises NonFiniteError."""
    if filtered is None:
        filtered = filter_series(gamma, data, spec, derivatives=False)
    terms = loglik_terms(data.y, filtered.mu)
    index = _first_bad(terms)
    if index is not None:
        raise NonFiniteError(f"Log-likelihood contribution is not finite at t={index}.", index=index)
    return float(terms.sum())


def _unclamped(weights, filtered):
    if filtered.clamped is None or not filtered.clamped.any():
        return weights
    return np.where(filtered.clamped, 0.0, weights)


def score(gamma, data, spec, filtered=None):
    """U(gamma) = D' T h with T = diag(1 / g'(mu_t)).

    Clamped times contribute nothing: there the likelihood term does not
    move with eta.
    """
    if filtered is None or filtered.deriv is None:
        filtered = filter_series(gamma, data, spec)
    weights = score_mu(data.y, filtered.mu) / spec.link.g_prime(filtered.mu)
    return filtered.deriv.T @ _unclamped(weights, filtered)


def cond_info(gamma, data, spec, filtered=None):
    """K_n(gamma) = D' T E_mu T D, symmetric positive semidefinite."""
    if filtered is None or filtered.deriv is None:
        filtered = filter_series(gamma, data, spec)
    weights = _unclamped(info_mu(filtered.mu) / spec.link.g_prime(filtered.mu) ** 2, filtered)
    deriv = filtered.deriv
    info = deriv.T @ (weights[:, None] * deriv)
    return 0.5 * (info + info.T)
