"""MARMA(p,q) models for time series on the unit interval."""

from importlib.metadata import PackageNotFoundError, version

try:  # pragma: no cover - fallback during editable installs
    __version__ = version("marma")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

from .core import (  # noqa: F401
    FilterOutput,
    ModelSpec,
    ParamVector,
    SeriesData,
    cond_info,
    filter_series,
    loglik,
    score,
)
from .links import LinkSpec, g, g_inv, g_prime  # noqa: F401
from .estimation import (  # noqa: F401
    FitOptions,
    FitResult,
    default_start,
    fit,
    information_criteria,
)
from .diagnostics import (  # noqa: F401
    ad_normality,
    confint,
    diagnose,
    ks_normality,
    residual_acf,
    residuals,
    wald_test,
)
from .forecast import (  # noqa: F401
    ForecastResult,
    accuracy_measures,
    bootstrap_intervals,
    harmonic_covariates,
    insample_interval,
    predict,
)
from .simulation import (  # noqa: F401
    McReport,
    ScenarioSpec,
    mc_asymptotic_normality,
    mc_coverage,
    mc_goodness_of_fit,
    mc_point_estimation,
    simulate,
)
from .config import RunConfig, config_hash, load_config  # noqa: F401
from .dataframes import df_to_orgtbl, read_dataset  # noqa: F401
from . import distribution  # noqa: F401

__all__ = [
    # core
    "FilterOutput",
    "ModelSpec",
    "ParamVector",
    "SeriesData",
    "cond_info",
    "filter_series",
    "loglik",
    "score",
    # links
    "LinkSpec",
    "g",
    "g_inv",
    "g_prime",
    # estimation
    "FitOptions",
    "FitResult",
    "default_start",
    "fit",
    "information_criteria",
    # diagnostics
    "ad_normality",
    "confint",
    "diagnose",
    "ks_normality",
    "residual_acf",
    "residuals",
    "wald_test",
    # forecast
    "ForecastResult",
    "accuracy_measures",
    "bootstrap_intervals",
    "harmonic_covariates",
    "insample_interval",
    "predict",
    # simulation
    "McReport",
    "ScenarioSpec",
    "mc_asymptotic_normality",
    "mc_coverage",
    "mc_goodness_of_fit",
    "mc_point_estimation",
    "simulate",
    # config and io
    "RunConfig",
    "config_hash",
    "load_config",
    "df_to_orgtbl",
    "read_dataset",
    # distribution module
    "distribution",
    # meta
    "__version__",
]
