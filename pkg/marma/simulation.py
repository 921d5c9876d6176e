"""Exact MARMA data generation and the Monte Carlo harness.

Every routine is reproducible from ``(scenario, seed)``: replica ``i`` draws
from substream ``i`` of ``numpy.random.SeedSequence(seed)`` and results are
gathered in replica order, so reports do not depend on the worker count.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats

from . import core, diagnostics, distribution, estimation, forecast, links
from .exceptions import DimensionError, DomainError, MarmaError, NonFiniteError

logger = logging.getLogger(__name__)

REJECTION_LEVEL = 0.05


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """A data-generating process plus the size of a Monte Carlo design.

    ``covariates`` holds ``(kind, period)`` harmonic terms, one per column of
    X; ``("sin", 100)`` gives X_t = sin(pi t / 50).
    """

    spec: core.ModelSpec
    gamma: core.ParamVector
    n: int = 200
    burn_in: int = 100
    covariates: tuple = ()
    replicas: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"Sample size must be positive, got {self.n}.")
        if self.burn_in < 0:
            raise DomainError(f"burn_in must be nonnegative, got {self.burn_in}.")
        if self.replicas < 1:
            raise DomainError(f"Need at least one replica, got {self.replicas}.")
        terms = tuple((str(kind), float(period)) for kind, period in self.covariates)
        if len(terms) != self.spec.r_cov:
            raise DimensionError(
                f"{self.spec} needs {self.spec.r_cov} covariate terms, got {len(terms)}."
            )
        object.__setattr__(self, "covariates", terms)
        gamma = self.gamma
        if not isinstance(gamma, core.ParamVector):
            gamma = core.ParamVector.from_array(gamma, self.spec)
        object.__setattr__(self, "gamma", gamma.check(self.spec))

    def covariate_matrix(self, t):
        """Covariate rows at (post burn-in) times ``t``."""
        return forecast.harmonic_covariates(t, self.covariates)


@dataclass(frozen=True, eq=False)
class SimulatedPath:
    data: core.SeriesData
    mu: np.ndarray
    eta: np.ndarray
    clip_count: int = 0


def simulate_path(scenario, rng=None, n=None):
    """Generate ``burn_in + n`` steps and keep the last ``n``.

    The kept observations are indexed t = 1..n; burn-in steps use the times
    1 - burn_in..0, so covariates follow the same rule throughout and the
    kept rows see X_t at t = 1..n.

    Draws are clipped into the band ``[EPS, 1 - EPS]`` of ``links.EPS``
    before they enter the recursion; the clip count is reported.
    """
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    n = scenario.n if n is None else n
    spec, gamma, link = scenario.spec, scenario.gamma, scenario.spec.link
    burn = scenario.burn_in
    total = burn + n

    x = scenario.covariate_matrix(np.arange(1 - burn, n + 1))
    xb = x @ gamma.beta
    xb0 = float(core._presample_x(x, spec.p_ar) @ gamma.beta)
    draws = rng.standard_gamma(distribution.GAMMA_SHAPE, size=total)

    gy = np.zeros(total)
    resid = np.zeros(total)
    eta = np.zeros(total)
    mu = np.zeros(total)
    y = np.zeros(total)
    clips = 0
    for s in range(total):
        value = gamma.alpha + xb[s]
        for i, phi_i in enumerate(gamma.phi, start=1):
            value += phi_i * ((gy[s - i] - xb[s - i]) if s >= i else -xb0)
        for j, theta_j in enumerate(gamma.theta, start=1):
            if s >= j:
                value += theta_j * resid[s - j]
        if not np.isfinite(value):
            raise NonFiniteError(f"Simulated linear predictor is not finite at step {s + 1}.", index=s + 1)
        eta[s] = value
        mu[s] = link.g_inv(value)
        y[s], clipped = links.clip_to_band(
            distribution.from_standard_gamma(draws[s], distribution.mean_to_shape(mu[s]))
        )
        clips += clipped
        gy[s] = link.g(y[s])
        resid[s] = gy[s] - value

    if clips:
        logger.debug("Clipped %d of %d simulated values into the link band.", clips, total)
        warnings.warn(
            f"{clips} of {total} simulated values fell outside [EPS, 1 - EPS] and were clipped.",
            RuntimeWarning,
            stacklevel=2,
        )
    keep = slice(burn, total)
    return SimulatedPath(
        data=core.SeriesData(y[keep], x[keep]), mu=mu[keep], eta=eta[keep], clip_count=clips
    )


def simulate(scenario, rng=None, n=None):
    """Simulated series of length ``n`` (default ``scenario.n``)."""
    return simulate_path(scenario, rng=rng, n=n).data


@dataclass(eq=False)
class McReport:
    """Monte Carlo summaries.

    ``estimates`` is R x k with NaN rows for replicas that raised.
    ``converged`` flags replicas whose fit met the score tolerance.
    """

    kind: str
    scenario: ScenarioSpec
    names: list
    estimates: np.ndarray
    converged: np.ndarray
    errors: int = 0
    rejection: dict = field(default_factory=dict)
    rejection_all: dict = field(default_factory=dict)
    coverage: pd.DataFrame = None
    normality: pd.DataFrame = None

    @property
    def n_replicas(self):
        return self.converged.size

    @property
    def n_nonconverged(self):
        return int(np.count_nonzero(~self.converged)) - self.errors

    def summary(self, converged_only=True):
        """Mean, median and standard deviation of the estimates per parameter."""
        rows = self.estimates[self.converged] if converged_only else self.estimates
        rows = rows[np.all(np.isfinite(rows), axis=1)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            out = pd.DataFrame(
                {
                    "mean": np.mean(rows, axis=0) if rows.size else np.nan,
                    "median": np.median(rows, axis=0) if rows.size else np.nan,
                    "sd": np.std(rows, axis=0, ddof=1) if rows.shape[0] > 1 else np.nan,
                },
                index=pd.Index(self.names, name="parameter"),
            )
        return out

    def to_frame(self):
        """Mean/median/SD triplets over converged replicas and over all replicas."""
        return pd.concat(
            {"converged": self.summary(True), "all": self.summary(False)},
            axis=1,
        )

    def conservative(self):
        """Per level, whether mean coverage across horizons reaches 1 - level."""
        if self.coverage is None:
            return {}
        return {level: bool(self.coverage[level].mean() >= 1.0 - level) for level in self.coverage.columns}

    def to_dict(self):
        s = self.scenario
        out = {
            "kind": self.kind,
            "scenario": {
                "spec": {
                    "p_ar": s.spec.p_ar,
                    "q_ma": s.spec.q_ma,
                    "r_cov": s.spec.r_cov,
                    "link": s.spec.link.kind,
                },
                "gamma": s.gamma.as_dict(s.spec),
                "n": s.n,
                "burn_in": s.burn_in,
                "covariates": [list(term) for term in s.covariates],
                "replicas": s.replicas,
                "seed": s.seed,
            },
            "replicas": self.n_replicas,
            "nonconverged": self.n_nonconverged,
            "errors": self.errors,
            "table": {
                subset: frame.to_dict(orient="index")
                for subset, frame in (("converged", self.summary(True)), ("all", self.summary(False)))
            },
        }
        if self.rejection:
            out["rejection"] = dict(self.rejection)
            out["rejection_all"] = dict(self.rejection_all)
        if self.coverage is not None:
            out["coverage"] = {
                str(level): self.coverage[level].tolist() for level in self.coverage.columns
            }
            out["conservative"] = {str(k): v for k, v in self.conservative().items()}
        if self.normality is not None:
            out["normality"] = self.normality.to_dict(orient="index")
        return out


@dataclass(frozen=True, eq=False)
class _Replica:
    estimates: np.ndarray
    converged: bool
    failed: bool = False
    extra: dict = field(default_factory=dict)


def _guarded(work, index, seed_seq):
    # Worker processes start with default filters, so set them per replica.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            return work(index, np.random.default_rng(seed_seq))
        except (MarmaError, np.linalg.LinAlgError) as exc:
            logger.debug("Replica %d failed: %s", index, exc)
            return None


def _run_replicas(work, scenario, threads=1):
    """Apply ``work(index, rng)`` to every replica, in replica order.

    ``threads > 1`` farms replicas out to joblib workers.
    """
    children = np.random.SeedSequence(scenario.seed).spawn(scenario.replicas)
    if threads > 1:
        return Parallel(n_jobs=threads)(
            delayed(_guarded)(work, i, child) for i, child in enumerate(children)
        )
    return [_guarded(work, i, child) for i, child in enumerate(children)]


def _fit_replica(data, spec, options):
    result = estimation.fit(data, spec, options)
    return result, _Replica(result.gamma_hat.to_array(), result.converged)


def _collect(kind, scenario, names, outcomes):
    k = len(names)
    estimates = np.full((len(outcomes), k), np.nan)
    converged = np.zeros(len(outcomes), dtype=bool)
    errors = 0
    for i, outcome in enumerate(outcomes):
        if outcome is None:
            errors += 1
            continue
        estimates[i] = outcome.estimates
        converged[i] = outcome.converged
    report = McReport(kind, scenario, list(names), estimates, converged, errors=errors)
    logger.info(
        "%s: %d replicas, %d not converged, %d failed.",
        kind,
        report.n_replicas,
        report.n_nonconverged,
        errors,
    )
    return report


def mc_point_estimation(scenario, options=None, threads=1):
    """Simulate and fit R times; summarize the estimates per parameter."""
    logger.info("Point estimation study: %s, n=%d, R=%d.", scenario.spec, scenario.n, scenario.replicas)

    def work(index, rng):
        data = simulate(scenario, rng=rng)
        return _fit_replica(data, scenario.spec, options)[1]

    outcomes = _run_replicas(work, scenario, threads)
    return _collect("point_estimation", scenario, scenario.spec.names(), outcomes)


def mc_goodness_of_fit(
    scenario, fit_spec=None, options=None, threads=1, level=REJECTION_LEVEL, null="composite"
):
    """Rejection rates of KS and AD tests on quantile residuals.

    ``null`` selects the composite (estimated mean and variance) or the
    simple N(0,1) null of ``diagnostics.ks_normality``.

    ``fit_spec`` fits a different model than the one generating the data
    (power studies); it must use the same covariates.
    """
    fit_spec = fit_spec or scenario.spec
    logger.info("Goodness-of-fit study: data %s, fitted %s, R=%d.", scenario.spec, fit_spec, scenario.replicas)

    def work(index, rng):
        data = simulate(scenario, rng=rng)
        result, outcome = _fit_replica(data, fit_spec, options)
        z = diagnostics.residuals(result, data).quantile
        outcome.extra["ks"] = diagnostics.ks_normality(z, null).p_value < level
        outcome.extra["ad"] = diagnostics.ad_normality(z, null).p_value < level
        return outcome

    outcomes = _run_replicas(work, scenario, threads)
    report = _collect("goodness_of_fit", scenario, fit_spec.names(), outcomes)
    done = [o for o in outcomes if o is not None]
    for test in ("ks", "ad"):
        report.rejection_all[test] = _rate([o.extra[test] for o in done])
        report.rejection[test] = _rate([o.extra[test] for o in done if o.converged])
    return report


def _rate(flags):
    return float(np.mean(flags)) if flags else float("nan")


def mc_coverage(scenario, h=10, m=300, levels=(0.05,), options=None, threads=1):
    """Coverage of bootstrap prediction intervals per horizon and level.

    Each replica simulates n + h points, fits the first n and checks whether
    the held-out values fall inside the intervals.  All levels share one set
    of bootstrap paths, so intervals are nested across levels.
    """
    levels = tuple(float(level) for level in levels)
    logger.info(
        "Coverage study: %s, n=%d, h=%d, m=%d, R=%d, levels=%s.",
        scenario.spec,
        scenario.n,
        h,
        m,
        scenario.replicas,
        levels,
    )

    def work(index, rng):
        full = simulate(scenario, rng=rng, n=scenario.n + h)
        data = full.truncate(scenario.n)
        result, outcome = _fit_replica(data, scenario.spec, options)
        boot_seed = int(rng.integers(2**63))
        fc = forecast.bootstrap_intervals(
            result, data, new_x=full.x[scenario.n :], h=h, m=m, level=levels[0], seed=boot_seed
        )
        future = full.y[scenario.n :]
        for level in levels:
            lower, upper = forecast.empirical_interval(fc.boot, level)
            outcome.extra[level] = (lower <= future) & (future <= upper)
        return outcome

    outcomes = _run_replicas(work, scenario, threads)
    report = _collect("coverage", scenario, scenario.spec.names(), outcomes)
    done = [o for o in outcomes if o is not None and o.converged]
    report.coverage = pd.DataFrame(
        {
            level: np.mean([o.extra[level] for o in done], axis=0) if done else np.full(h, np.nan)
            for level in levels
        },
        index=pd.Index(np.arange(1, h + 1), name="horizon"),
    )
    return report


def mc_asymptotic_normality(scenario, options=None, threads=1, level=0.05):
    """Standardized estimates (gamma_hat - gamma) / stderr across replicas.

    Reports per parameter a KS test of the standardized estimates against
    N(0,1) and the coverage of the Wald intervals at ``level``.
    """
    truth = scenario.gamma.to_array()
    logger.info("Asymptotic normality study: %s, n=%d, R=%d.", scenario.spec, scenario.n, scenario.replicas)

    def work(index, rng):
        data = simulate(scenario, rng=rng)
        result, outcome = _fit_replica(data, scenario.spec, options)
        if result.singular:
            outcome.extra["z"] = np.full(truth.size, np.nan)
        else:
            outcome.extra["z"] = (outcome.estimates - truth) / result.stderr
        return outcome

    outcomes = _run_replicas(work, scenario, threads)
    report = _collect("asymptotic_normality", scenario, scenario.spec.names(), outcomes)
    z = np.array([o.extra["z"] for o in outcomes if o is not None and o.converged])
    crit = stats.norm.ppf(1.0 - level / 2.0)
    rows = {}
    for j, name in enumerate(report.names):
        zj = z[:, j][np.isfinite(z[:, j])] if z.size else np.zeros(0)
        if zj.size:
            ks = stats.kstest(zj, "norm")
            rows[name] = {
                "ks_statistic": float(ks.statistic),
                "ks_p_value": float(ks.pvalue),
                "wald_coverage": float(np.mean(np.abs(zj) <= crit)),
            }
        else:
            rows[name] = {"ks_statistic": np.nan, "ks_p_value": np.nan, "wald_coverage": np.nan}
    report.normality = pd.DataFrame.from_dict(rows, orient="index")
    report.normality.index.name = "parameter"
    return report
