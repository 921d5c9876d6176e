"""Run configuration: JSON files, environment overrides and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from . import core, estimation, simulation
from .exceptions import InputFileError, ValidationError

ENV_THREADS = "MARMA_THREADS"


def _default_threads() -> int:
    raw = os.environ.get(ENV_THREADS)
    if raw is None or not raw.strip():
        return 0
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValidationError(f"{ENV_THREADS} must be a positive integer, got {raw!r}.") from exc
    if value < 1:
        raise ValidationError(f"{ENV_THREADS} must be a positive integer, got {raw!r}.")
    return value


@dataclass(frozen=True)
class ModelConfig:
    p_ar: int = 0
    q_ma: int = 0
    link: str = "cloglog"
    y: str = "y"
    covariates: tuple = ()
    harmonics: tuple = ()
    time: Optional[str] = None

    def to_spec(self) -> core.ModelSpec:
        return core.ModelSpec(self.p_ar, self.q_ma, len(self.covariates) + len(self.harmonics), self.link)


@dataclass(frozen=True)
class FitConfig:
    max_evals: int = 2000
    grad_tol: float = 1e-4
    rel_f_tol: float = 1e-12
    fixed: Mapping[str, float] = field(default_factory=dict)
    polish: bool = True

    def to_options(self) -> estimation.FitOptions:
        return estimation.FitOptions(
            max_evals=self.max_evals,
            grad_tol=self.grad_tol,
            rel_f_tol=self.rel_f_tol,
            fixed=dict(self.fixed),
            polish=self.polish,
        )


@dataclass(frozen=True)
class ForecastConfig:
    horizon: int = 10
    boot: int = 500
    level: float = 0.05
    seed: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    """One Monte Carlo design.

    ``study`` is one of ``point``, ``gof``, ``coverage`` or ``normality``.
    ``fit_order`` fits a different (p,q) than the generating model.
    """

    p_ar: int = 1
    q_ma: int = 1
    link: str = "cloglog"
    gamma: Mapping[str, float] = field(default_factory=dict)
    n: int = 200
    burn_in: int = 100
    covariates: tuple = ()
    replicas: int = 100
    seed: int = 0
    study: str = "point"
    levels: tuple = (0.05,)
    horizon: int = 10
    boot: int = 300
    fit_order: Optional[tuple] = None

    def to_scenario(self, seed: Optional[int] = None) -> simulation.ScenarioSpec:
        spec = core.ModelSpec(self.p_ar, self.q_ma, len(self.covariates), self.link)
        missing = [name for name in spec.names() if name not in self.gamma]
        unknown = sorted(set(self.gamma) - set(spec.names()))
        if missing or unknown:
            raise ValidationError(
                f"Scenario gamma must name exactly {', '.join(spec.names())}; "
                f"missing {missing}, unknown {unknown}."
            )
        gamma = core.ParamVector.from_array([self.gamma[name] for name in spec.names()], spec)
        return simulation.ScenarioSpec(
            spec=spec,
            gamma=gamma,
            n=self.n,
            burn_in=self.burn_in,
            covariates=self.covariates,
            replicas=self.replicas,
            seed=self.seed if seed is None else seed,
        )

    def fit_spec(self) -> core.ModelSpec:
        if self.fit_order is None:
            return core.ModelSpec(self.p_ar, self.q_ma, len(self.covariates), self.link)
        p, q = self.fit_order
        return core.ModelSpec(p, q, len(self.covariates), self.link)


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    scenarios: tuple = ()
    threads: int = 0

    def resolve_threads(self, flag: Optional[int] = None) -> int:
        """Worker count: flag, then MARMA_THREADS, then the file, then 1."""
        for value in (flag, _default_threads(), self.threads):
            if value:
                if value < 1:
                    raise ValidationError(f"Thread count must be positive, got {value}.")
                return int(value)
        return 1

    def to_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self))


def _jsonable(value):
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _build(cls, raw: Any, path: str):
    if not isinstance(raw, Mapping):
        raise ValidationError(f"{path or 'config'} must be a JSON object.")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        prefix = f"{path}." if path else ""
        raise ValidationError(f"Unknown config key(s): {', '.join(prefix + k for k in unknown)}.")
    kwargs = {}
    for key, value in raw.items():
        where = f"{path}.{key}" if path else key
        if cls is RunConfig and key in ("model", "fit", "forecast"):
            sub = {"model": ModelConfig, "fit": FitConfig, "forecast": ForecastConfig}[key]
            kwargs[key] = _build(sub, value, where)
        elif cls is RunConfig and key == "scenarios":
            if not isinstance(value, list):
                raise ValidationError(f"{where} must be a list.")
            kwargs[key] = tuple(_build(ScenarioConfig, s, f"{where}[{i}]") for i, s in enumerate(value))
        else:
            kwargs[key] = _tupled(value)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"Invalid {path or 'config'}: {exc}") from exc


def config_from_dict(raw: Mapping) -> RunConfig:
    """Validate a parsed JSON object; unknown keys raise ValidationError."""
    config = _build(RunConfig, raw, "")
    if config.scenarios:
        for scenario in config.scenarios:
            if scenario.study not in ("point", "gof", "coverage", "normality"):
                raise ValidationError(f"Unknown study {scenario.study!r}.")
    return config


def load_config(path: Optional[os.PathLike[str] | str]) -> RunConfig:
    """Read a RunConfig from a JSON file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    with Path(path).open(encoding="utf-8") as config_file:
        try:
            raw = json.load(config_file)
        except json.JSONDecodeError as exc:
            raise InputFileError(f"{path}: line {exc.lineno}: {exc.msg}", line=exc.lineno) from exc
    return config_from_dict(raw)


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON dump of ``config``."""
    dump = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(dump.encode("utf-8")).hexdigest()
