"""Partial maximum likelihood estimation of MARMA(p,q) models."""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize, stats

from . import core
from .exceptions import (
    ConvergenceError,
    DomainError,
    InsufficientDataError,
    NonFiniteError,
    SingularInformationError,
    ValidationError,
)

logger = logging.getLogger(__name__)

#: Objective value returned where the recursion breaks down.
_OUT_OF_BOUNDS = 1e10
_MAX_CONDITION = 1e12
#: Starting values see g(Y_t) with Y_t winsorized to [_START_BAND, 1 - _START_BAND].
_START_BAND = 1e-3


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    ``fixed`` maps parameter labels (``"phi_2"``, ...) to values held
    constant during the fit.  ``polish`` runs a Nelder-Mead pass after the
    quasi-Newton stage; ``scoring_steps`` bounds the final Fisher-scoring
    refinement that drives the score below ``grad_tol``.
    """

    max_evals: int = 2000
    grad_tol: float = 1e-4
    rel_f_tol: float = 1e-12
    start: core.ParamVector = None
    fixed: dict = field(default_factory=dict)
    polish: bool = True
    scoring_steps: int = 25
    raise_on_failure: bool = False

    def __post_init__(self):
        if self.grad_tol <= 0 or self.rel_f_tol <= 0:
            raise DomainError("Tolerances must be positive.")
        if self.max_evals < 1:
            raise DomainError("max_evals must be positive.")


@dataclass(eq=False)
class FitResult:
    spec: core.ModelSpec
    gamma_hat: core.ParamVector
    loglik_hat: float
    cond_info: np.ndarray
    cov: np.ndarray
    stderr: np.ndarray
    score: np.ndarray
    n_obs: int
    n_evals: int
    converged: bool
    clamp_count: int
    ic: dict
    fixed: tuple = ()
    singular: bool = False
    message: str = ""
    filtered: core.FilterOutput = None

    def names(self):
        return self.spec.names()

    @property
    def n_free(self):
        return self.spec.n_params - len(self.fixed)

    def summary_frame(self):
        """Estimates with standard errors, z statistics and p-values."""
        est = self.gamma_hat.to_array()
        z = est / self.stderr
        df = pd.DataFrame(
            {
                "estimate": est,
                "stderr": self.stderr,
                "z": z,
                "p_value": 2.0 * stats.norm.sf(np.abs(z)),
            },
            index=pd.Index(self.names(), name="parameter"),
        )
        return df

    def to_dict(self):
        """JSON-ready representation (model persistence)."""
        return {
            "spec": {
                "p_ar": self.spec.p_ar,
                "q_ma": self.spec.q_ma,
                "r_cov": self.spec.r_cov,
                "link": self.spec.link.kind,
            },
            "gamma_hat": self.gamma_hat.as_dict(self.spec),
            "loglik": self.loglik_hat,
            "cond_info": self.cond_info.tolist(),
            "cov": _nan_to_none(self.cov),
            "stderr": _nan_to_none(self.stderr),
            "score": self.score.tolist(),
            "n_obs": self.n_obs,
            "n_evals": self.n_evals,
            "converged": self.converged,
            "clamp_count": self.clamp_count,
            "ic": dict(self.ic),
            "fixed": list(self.fixed),
            "singular": self.singular,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d):
        s = d["spec"]
        spec = core.ModelSpec(s["p_ar"], s["q_ma"], s["r_cov"], s["link"])
        gamma = core.ParamVector.from_array([d["gamma_hat"][k] for k in spec.names()], spec)
        return cls(
            spec=spec,
            gamma_hat=gamma,
            loglik_hat=float(d["loglik"]),
            cond_info=np.asarray(d["cond_info"], dtype=float),
            cov=_none_to_nan(d["cov"]),
            stderr=_none_to_nan(d["stderr"]),
            score=np.asarray(d["score"], dtype=float),
            n_obs=int(d["n_obs"]),
            n_evals=int(d["n_evals"]),
            converged=bool(d["converged"]),
            clamp_count=int(d["clamp_count"]),
            ic=dict(d["ic"]),
            fixed=tuple(d.get("fixed", ())),
            singular=bool(d.get("singular", False)),
            message=d.get("message", ""),
        )


def _nan_to_none(a):
    a = np.asarray(a, dtype=float)
    return np.where(np.isfinite(a), a, None).tolist()


def _none_to_nan(values):
    return np.array(values, dtype=float)


def information_criteria(loglik_hat, n, k):
    """AIC, BIC and HQC from a maximized partial log-likelihood.

    ``loglik_hat`` may also be a :class:`FitResult`.
    """
    if isinstance(loglik_hat, FitResult):
        loglik_hat = loglik_hat.loglik_hat
    base = -2.0 * loglik_hat
    return {
        "aic": base + 2.0 * k,
        "bic": base + k * np.log(n),
        "hqc": base + 2.0 * k * np.log(np.log(n)),
    }


def _start_gy(data, spec):
    return spec.link.g(np.clip(data.y, _START_BAND, 1.0 - _START_BAND))


def fallback_start(data, spec):
    """alpha = mean g(Y_t), zeros elsewhere."""
    return core.ParamVector.from_array(
        np.concatenate([[_start_gy(data, spec).mean()], np.zeros(spec.n_params - 1)]), spec
    )


def default_start(data, spec):
    """Least-squares starting values.

    alpha and beta regress g(Y_t) on (1, X_t); phi regresses the regression
    residuals on their own p lags; theta starts at 0.  Y_t is winsorized to
    [0.001, 0.999] first so a few extreme observations cannot dominate the
    regression.  A singular regression falls back to :func:`fallback_start`.
    """
    gy = _start_gy(data, spec)
    design = np.column_stack([np.ones(data.n), data.x])
    fallback = fallback_start(data, spec)

    coef, _, rank, _ = np.linalg.lstsq(design, gy, rcond=None)
    if rank < design.shape[1]:
        return fallback
    resid = gy - design @ coef

    phi = np.zeros(spec.p_ar)
    if spec.p_ar:
        p = spec.p_ar
        if data.n <= 2 * p:
            return fallback
        lags = np.column_stack([resid[p - i : data.n - i] for i in range(1, p + 1)])
        phi, _, rank, _ = np.linalg.lstsq(lags, resid[p:], rcond=None)
        if rank < p:
            return fallback

    return core.ParamVector(coef[0], coef[1:], phi, np.zeros(spec.q_ma))


class _Objective:
    """Negative log-likelihood over the free coordinates, with call counting."""

    def __init__(self, data, spec, full, free):
        self.data, self.spec = data, spec
        self.full = np.array(full, dtype=float)
        self.free = free
        self.n_evals = 0

    def expand(self, x):
        full = self.full.copy()
        full[self.free] = x
        return full

    def filtered(self, x, derivatives=True):
        return core.filter_series(self.expand(x), self.data, self.spec, derivatives=derivatives)

    def value(self, x):
        self.n_evals += 1
        try:
            return -core.loglik(None, self.data, self.spec, filtered=self.filtered(x, derivatives=False))
        except (NonFiniteError, DomainError, FloatingPointError):
            return _OUT_OF_BOUNDS

    def value_and_grad(self, x):
        self.n_evals += 1
        try:
            out = self.filtered(x)
            value = -core.loglik(None, self.data, self.spec, filtered=out)
            grad = -core.score(None, self.data, self.spec, filtered=out)[self.free]
        except (NonFiniteError, DomainError, FloatingPointError):
            return _OUT_OF_BOUNDS, np.zeros(len(self.free))
        if not np.all(np.isfinite(grad)):
            return _OUT_OF_BOUNDS, np.zeros(len(self.free))
        return value, grad


def _check_data(data, spec):
    if data.r != spec.r_cov:
        raise ValidationError(f"Data carry {data.r} covariates but {spec} expects {spec.r_cov}.")
    if data.n <= spec.n_params:
        raise InsufficientDataError(
            f"Need more than {spec.n_params} observations to fit {spec}, got {data.n}."
        )
    if np.ptp(data.y) == 0:
        raise InsufficientDataError("Series is constant.")


def _fisher_scoring(objective, x, steps, grad_tol):
    """Newton-type refinement with K_n in place of the Hessian."""
    value, grad = objective.value_and_grad(x)
    for _ in range(steps):
        if np.max(np.abs(grad)) <= grad_tol:
            break
        out = objective.filtered(x)
        info = core.cond_info(None, objective.data, objective.spec, filtered=out)
        info = info[np.ix_(objective.free, objective.free)]
        try:
            direction = np.linalg.solve(info, -grad)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        for _ in range(30):
            candidate = x + step * direction
            cand_value, cand_grad = objective.value_and_grad(candidate)
            if cand_value <= value:
                break
            step *= 0.5
        else:
            break
        x, value, grad = candidate, cand_value, cand_grad
    return x, value, grad


def _covariance(info, free):
    """Inverse of K_n over the free block, NaN elsewhere; None if singular."""
    k = info.shape[0]
    block = info[np.ix_(free, free)]
    if block.size and (not np.all(np.isfinite(block)) or np.linalg.cond(block) > _MAX_CONDITION):
        return None
    try:
        inv = np.linalg.inv(block)
    except np.linalg.LinAlgError:
        return None
    cov = np.full((k, k), np.nan)
    cov[np.ix_(free, free)] = inv
    return cov


def fit(data, spec, options=None):
    """Partial maximum likelihood fit of ``spec`` to ``data``.

    Stages: L-BFGS-B with the analytic score, an optional Nelder-Mead polish,
    then Fisher scoring until the sup-norm of the score drops below
    ``options.grad_tol``.  Non-convergence is reported through
    ``FitResult.converged`` (and a RuntimeWarning), or raised as
    :class:`ConvergenceError` when ``options.raise_on_failure``.
    """
    options = options or FitOptions()
    _check_data(data, spec)

    names = spec.names()
    unknown = set(options.fixed) - set(names)
    if unknown:
        raise ValidationError(f"Cannot fix unknown parameters: {', '.join(sorted(unknown))}.")

    free = [i for i, name in enumerate(names) if name not in options.fixed]

    def pinned(candidate):
        full = candidate.check(spec).to_array()
        for name, value in options.fixed.items():
            full[names.index(name)] = value
        return full

    fallback = pinned(fallback_start(data, spec))
    start = pinned(options.start) if options.start is not None else pinned(default_start(data, spec))
    objective = _Objective(data, spec, start, free)
    x0 = start[free]
    f0 = objective.value(x0)
    # Without a user start, also try the fallback and keep the better point.
    if f0 >= _OUT_OF_BOUNDS or options.start is None:
        f_fallback = objective.value(fallback[free])
        if f_fallback < f0:
            logger.debug("Fallback start beats %s (%.6g < %.6g).", x0, f_fallback, f0)
            x0 = fallback[free]

    res = optimize.minimize(
        objective.value_and_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxfun": options.max_evals, "gtol": options.grad_tol, "ftol": options.rel_f_tol},
    )
    x, value = res.x, res.fun
    logger.debug("L-BFGS-B: %s (f=%.6g, evals=%d)", res.message, value, objective.n_evals)

    if options.polish and len(free):
        remaining = max(options.max_evals - objective.n_evals, 1)
        nm = optimize.minimize(
            objective.value,
            x,
            method="Nelder-Mead",
            options={"maxfev": remaining, "xatol": 1e-10, "fatol": options.rel_f_tol},
        )
        if nm.fun < value:
            x, value = nm.x, nm.fun
        logger.debug("Nelder-Mead polish: f=%.6g, evals=%d", value, objective.n_evals)

    x, value, grad = _fisher_scoring(objective, x, options.scoring_steps, options.grad_tol)

    gamma_hat = core.ParamVector.from_array(objective.expand(x), spec)
    finite = value < _OUT_OF_BOUNDS
    if finite:
        filtered = core.filter_series(gamma_hat, data, spec)
        full_score = core.score(gamma_hat, data, spec, filtered=filtered)
        info = core.cond_info(gamma_hat, data, spec, filtered=filtered)
        loglik_hat = -value
    else:
        filtered = None
        full_score = np.full(spec.n_params, np.nan)
        info = np.full((spec.n_params, spec.n_params), np.nan)
        loglik_hat = -np.inf

    sup_norm = float(np.max(np.abs(full_score[free]))) if free else 0.0
    converged = bool(finite and sup_norm <= options.grad_tol)

    cov = _covariance(info, free) if finite else None
    singular = cov is None
    if singular:
        cov = np.full((spec.n_params, spec.n_params), np.nan)
        if finite:
            warnings.warn(
                "Conditional information matrix is numerically singular; standard errors withheld.",
                RuntimeWarning,
            )
    stderr = np.sqrt(np.diag(cov))

    message = "converged" if converged else f"score sup-norm {sup_norm:.3g} exceeds {options.grad_tol:.3g}"
    result = FitResult(
        spec=spec,
        gamma_hat=gamma_hat,
        loglik_hat=loglik_hat,
        cond_info=info,
        cov=cov,
        stderr=stderr,
        score=full_score,
        n_obs=data.n,
        n_evals=objective.n_evals,
        converged=converged,
        clamp_count=filtered.clamp_count if filtered is not None else 0,
        ic=information_criteria(loglik_hat, data.n, len(free)),
        fixed=tuple(name for name in names if name in options.fixed),
        singular=singular,
        message=message,
        filtered=filtered,
    )
    logger.debug("Fit of %s: %s after %d evaluations.", spec, message, objective.n_evals)

    if not converged:
        if options.raise_on_failure:
            raise ConvergenceError(f"Fit of {spec} did not converge: {message}.", fit=result)
        warnings.warn(f"Fit of {spec} did not converge: {message}.", RuntimeWarning)
    return result


def require_stderr(fit_result):
    """Raise SingularInformationError when a fit has no standard errors."""
    if fit_result.singular:
        raise SingularInformationError("Conditional information matrix is singular.")
    return fit_result.stderr
