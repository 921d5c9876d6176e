"""Command-line interface: ``marma fit|forecast|simulate|mc|diagnose``.

Exit codes: 0 success, 2 invalid input or configuration, 3 non-convergence,
4 unreadable or unwritable files.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, config as cfg, diagnostics, estimation, forecast, simulation
from .dataframes import df_to_orgtbl, fit_report_table, read_dataset, write_dataset
from .exceptions import (
    ConvergenceError,
    InputFileError,
    MarmaError,
    NonFiniteError,
    SingularInformationError,
    ValidationError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}.")


def _finite_or_none(value):
    """Recursively replace NaN and infinities by None; JSON has no spelling for them."""
    if isinstance(value, dict):
        return {key: _finite_or_none(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_none(item) for item in value]
    if isinstance(value, np.ndarray):
        return _finite_or_none(value.tolist())
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def _dumps(payload):
    return (
        json.dumps(
            _finite_or_none(payload), indent=2, sort_keys=True, allow_nan=False, default=_json_default
        )
        + "\n"
    )


def _write_json(payload, path):
    if path is None:
        sys.stdout.write(_dumps(payload))
        return
    Path(path).write_text(_dumps(payload), encoding="utf-8")
    logger.info("Wrote %s.", path)


def _metadata(command, config, seed=None):
    return {
        "command": command,
        "config_hash": cfg.config_hash(config),
        "seed": seed,
        "version": __version__,
    }


def _parse_order(text):
    try:
        p, q = (int(part) for part in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"--order expects 'p,q', got {text!r}.") from exc
    return p, q


def _effective_config(args):
    """Config file values with command-line overrides applied."""
    config = cfg.load_config(args.config)
    model, fc = config.model, config.forecast
    if getattr(args, "link", None):
        model = dataclasses.replace(model, link=args.link)
    if getattr(args, "order", None):
        p, q = _parse_order(args.order)
        model = dataclasses.replace(model, p_ar=p, q_ma=q)
    overrides = {
        key: getattr(args, flag)
        for key, flag in (("horizon", "horizon"), ("level", "level"), ("boot", "boot"), ("seed", "seed"))
        if getattr(args, flag, None) is not None
    }
    fc = dataclasses.replace(fc, **overrides)
    return dataclasses.replace(config, model=model, forecast=fc)


def _load_dataset(path, model_config):
    if path is None:
        raise ValidationError("--data is required.")
    return read_dataset(
        path,
        y=model_config.y,
        covariates=model_config.covariates,
        time=model_config.time,
        harmonics=model_config.harmonics,
    )


def _model_payload(fit_result, config, meta):
    payload = fit_result.to_dict()
    payload["dataset"] = dataclasses.asdict(config.model)
    payload["metadata"] = meta
    return payload


def _load_model(path):
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}: line {exc.lineno}: {exc.msg}", line=exc.lineno) from exc
    try:
        fit_result = estimation.FitResult.from_dict(payload)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path} is not a fitted model file: {exc}.") from exc
    raw = payload.get("dataset", {})
    model_config = cfg.ModelConfig(**{k: cfg._tupled(v) for k, v in raw.items()})
    return fit_result, model_config


def cmd_fit(args):
    config = _effective_config(args)
    dataset = _load_dataset(args.data, config.model)
    spec = config.model.to_spec()
    logger.info("Fitting %s to %d observations.", spec, dataset.data.n)
    result = estimation.fit(dataset.data, spec, config.fit.to_options())

    meta = _metadata("fit", config)
    report = _model_payload(result, config, meta)
    if not result.singular:
        p_values = result.summary_frame()["p_value"]
        report["wald_p_values"] = {k: (None if np.isnan(v) else float(v)) for k, v in p_values.items()}
    report["diagnostics"] = diagnostics.diagnose(result, dataset.data)

    print(f"{spec}, n = {dataset.data.n}, converged = {result.converged}")
    print(fit_report_table(result), end="")
    print(
        "loglik = %.6g, AIC = %.6g, BIC = %.6g, HQC = %.6g"
        % (result.loglik_hat, result.ic["aic"], result.ic["bic"], result.ic["hqc"])
    )
    if args.out:
        _write_json(report, args.out)
    if not result.converged:
        logger.error("Fit did not converge: %s.", result.message)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _fit_or_load(args, config):
    if args.model:
        result, model_config = _load_model(args.model)
        return result, model_config
    result = estimation.fit(
        _load_dataset(args.data, config.model).data,
        config.model.to_spec(),
        config.fit.to_options(),
    )
    if not result.converged:
        raise ConvergenceError(f"Fit did not converge: {result.message}.", fit=result)
    return result, config.model


def _future_covariates(args, dataset, model_config, h):
    """Covariate rows for t = n+1..n+h, from --future and/or harmonic terms."""
    if not model_config.covariates and not model_config.harmonics:
        return None
    columns = []
    if model_config.covariates:
        if args.future is None:
            raise ValidationError(
                f"Model uses covariates {', '.join(model_config.covariates)}; "
                "pass their future values with --future."
            )
        try:
            frame = pd.read_csv(args.future, sep=",", decimal=".", encoding="utf-8")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise InputFileError(f"{args.future}: {exc}") from exc
        absent = [c for c in model_config.covariates if c not in frame.columns]
        if absent or len(frame) < h:
            raise ValidationError(f"{args.future} needs {h} rows of {', '.join(model_config.covariates)}.")
        columns.append(frame[list(model_config.covariates)].to_numpy(dtype=float)[:h])
    if model_config.harmonics:
        columns.append(forecast.harmonic_covariates(dataset.future_time(h), model_config.harmonics))
    return np.column_stack(columns)


def cmd_forecast(args):
    config = _effective_config(args)
    result, model_config = _fit_or_load(args, config)
    dataset = _load_dataset(args.data, model_config)
    fc_config = config.forecast
    h = fc_config.horizon
    new_x = _future_covariates(args, dataset, model_config, h)
    threads = config.resolve_threads(args.threads)
    out = forecast.bootstrap_intervals(
        result,
        dataset.data,
        new_x=new_x,
        h=h,
        m=fc_config.boot,
        level=fc_config.level,
        seed=fc_config.seed,
        threads=threads,
    )
    frame = out.to_frame()
    meta = _metadata("forecast", config, seed=fc_config.seed)
    meta.update(
        {
            "horizon": h,
            "boot": fc_config.boot,
            "level": fc_config.level,
            "clamp_count": out.clamp_count,
            "converged": bool(result.converged),
        }
    )

    print(df_to_orgtbl(frame.set_index("step")), end="")
    if args.out:
        frame.to_csv(args.out, index=False, float_format="%.17g", lineterminator="\n")
        _write_json(meta, _sidecar(args.out))
    else:
        _write_json({"metadata": meta, "forecast": frame.to_dict(orient="list")}, None)
    return EXIT_OK


def _sidecar(path):
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _scenario_config(config, args):
    if not config.scenarios:
        raise ValidationError("Config declares no scenarios.")
    index = getattr(args, "scenario", 0) or 0
    if not 0 <= index < len(config.scenarios):
        raise ValidationError(f"Scenario index {index} out of range.")
    return config.scenarios[index]


def cmd_simulate(args):
    config = _effective_config(args)
    scen_config = _scenario_config(config, args)
    seed = args.seed if args.seed is not None else scen_config.seed
    scenario = scen_config.to_scenario(seed=seed)
    data = simulation.simulate(scenario)
    names = [f"{kind}_{period:g}" for kind, period in scenario.covariates]
    meta = _metadata("simulate", config, seed=seed)
    if args.out:
        write_dataset(args.out, data, names=names)
        _write_json(meta, _sidecar(args.out))
    else:
        frame = write_dataset(sys.stdout, data, names=names)
        logger.info("Simulated %d observations.", len(frame))
    return EXIT_OK


def _run_study(scen_config, scenario, options, threads):
    if scen_config.study == "point":
        return simulation.mc_point_estimation(scenario, options=options, threads=threads)
    if scen_config.study == "gof":
        return simulation.mc_goodness_of_fit(
            scenario, fit_spec=scen_config.fit_spec(), options=options, threads=threads
        )
    if scen_config.study == "coverage":
        return simulation.mc_coverage(
            scenario,
            h=scen_config.horizon,
            m=scen_config.boot,
            levels=scen_config.levels,
            options=options,
            threads=threads,
        )
    return simulation.mc_asymptotic_normality(scenario, options=options, threads=threads)


def cmd_mc(args):
    config = _effective_config(args)
    if not config.scenarios:
        raise ValidationError("Config declares no scenarios.")
    threads = config.resolve_threads(args.threads)
    options = config.fit.to_options()
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    reports = []
    for i, scen_config in enumerate(config.scenarios):
        seed = args.seed if args.seed is not None else scen_config.seed
        scenario = scen_config.to_scenario(seed=seed)
        report = _run_study(scen_config, scenario, options, threads)
        payload = report.to_dict()
        payload["metadata"] = _metadata("mc", config, seed=seed)
        reports.append(payload)

        print(f"Scenario {i}: {scen_config.study}, {scenario.spec}, n = {scenario.n}, R = {scenario.replicas}")
        print(df_to_orgtbl(report.to_frame()), end="")
        for test, rate in report.rejection.items():
            print(f"{test.upper()} rejection rate = {rate:.6g} (all replicas: {report.rejection_all[test]:.6g})")
        for extra in (report.coverage, report.normality):
            if extra is not None:
                print(df_to_orgtbl(extra), end="")
        if out_dir is not None:
            _write_json(payload, out_dir / f"scenario_{i}.json")
            report.to_frame().to_csv(out_dir / f"scenario_{i}_table.csv", lineterminator="\n")
    if out_dir is None:
        _write_json(reports, None)
    return EXIT_OK


def cmd_diagnose(args):
    config = _effective_config(args)
    if not args.model:
        raise ValidationError("--model is required.")
    result, model_config = _load_model(args.model)
    dataset = _load_dataset(args.data, model_config)
    payload = diagnostics.diagnose(result, dataset.data)
    payload["metadata"] = _metadata("diagnose", config)
    for test in ("ks", "ad"):
        entry = payload[test]
        if entry["p_value"] is None:
            print(f"{test.upper()} skipped: {entry['skipped']}")
        else:
            print(f"{test.upper()} p-value = {entry['p_value']:.6g}")
    _write_json(payload, args.out)
    return EXIT_OK


def _common(parser, *flags):
    parser.add_argument("--config", help="JSON run configuration.")
    parser.add_argument("--out", help="Output file (directory for mc).")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    if "data" in flags:
        parser.add_argument("--data", help="CSV dataset with a header row.")
    if "model" in flags:
        parser.add_argument("--model", help="Fitted model JSON written by 'marma fit --out'.")
    if "spec" in flags:
        parser.add_argument("--link", choices=("logit", "cloglog", "loglog"))
        parser.add_argument("--order", help="AR and MA orders as 'p,q'.")
    if "seed" in flags:
        parser.add_argument("--seed", type=int)
    if "threads" in flags:
        parser.add_argument("--threads", type=int, help="Worker threads (overrides MARMA_THREADS).")


def build_parser():
    parser = argparse.ArgumentParser(prog="marma", description="MARMA models for time series on (0,1).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="Fit a model to a dataset.")
    _common(p, "data", "spec")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("forecast", help="Point forecasts and bootstrap intervals.")
    _common(p, "data", "model", "spec", "seed", "threads")
    p.add_argument("--horizon", type=int)
    p.add_argument("--level", type=float, help="Interval level delta; coverage is 1 - delta.")
    p.add_argument("--boot", type=int, help="Number of bootstrap paths.")
    p.add_argument("--future", help="CSV with future covariate values.")
    p.set_defaults(handler=cmd_forecast)

    p = sub.add_parser("simulate", help="Simulate a dataset from a scenario.")
    _common(p, "seed")
    p.add_argument("--scenario", type=int, default=0, help="Index into the config's scenarios.")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("mc", help="Run the config's Monte Carlo scenarios.")
    _common(p, "seed", "threads")
    p.set_defaults(handler=cmd_mc)

    p = sub.add_parser("diagnose", help="Residual diagnostics of a fitted model.")
    _common(p, "data", "model")
    p.set_defaults(handler=cmd_diagnose)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (ConvergenceError, SingularInformationError, NonFiniteError) as exc:
        logger.error("%s", exc)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except (MarmaError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
