import json

import pandas as pd
import pytest

import numpy as np

from marma.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, _dumps, main

RUN = {
    "model": {"p_ar": 1, "q_ma": 0, "link": "logit", "harmonics": [["sin", 100]]},
    "forecast": {"horizon": 4, "boot": 100, "level": 0.1, "seed": 7},
    "scenarios": [
        {
            "p_ar": 1,
            "q_ma": 0,
            "link": "logit",
            "gamma": {"alpha": 0.3, "beta_1": -0.4, "phi_1": 0.4},
            "covariates": [["sin", 100]],
            "n": 300,
            "burn_in": 50,
            "replicas": 2,
            "seed": 21,
        }
    ],
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "run.json").write_text(json.dumps(RUN))
    return tmp_path


def test_simulate_fit_forecast_diagnose(workdir):
    config = str(workdir / "run.json")
    data = str(workdir / "sim.csv")
    model = str(workdir / "model.json")

    assert main(["simulate", "--config", config, "--out", data]) == EXIT_OK
    frame = pd.read_csv(data)
    assert list(frame.columns) == ["t", "y", "sin_100"]
    assert len(frame) == 300
    assert json.loads((workdir / "sim.meta.json").read_text())["seed"] == 21

    assert main(["fit", "--config", config, "--data", data, "--out", model]) == EXIT_OK
    model_text = (workdir / "model.json").read_text()
    fitted = json.loads(model_text)
    assert fitted["converged"]
    assert set(fitted["wald_p_values"]) == {"alpha", "beta_1", "phi_1"}
    assert "ks" in fitted["diagnostics"] and model_text.endswith("\n")

    forecast = str(workdir / "fc.csv")
    args = ["forecast", "--config", config, "--data", data, "--model", model, "--out", forecast]
    assert main(args) == EXIT_OK
    out = pd.read_csv(forecast)
    assert list(out.columns) == ["step", "point", "lower", "upper"]
    assert len(out) == 4
    assert (out["lower"] <= out["upper"]).all()
    meta = json.loads((workdir / "fc.meta.json").read_text())
    assert meta["seed"] == 7 and meta["boot"] == 100

    diag = str(workdir / "diag.json")
    assert main(["diagnose", "--data", data, "--model", model, "--out", diag]) == EXIT_OK
    assert 0 <= json.loads((workdir / "diag.json").read_text())["ad"]["p_value"] <= 1


def test_forecast_replays_byte_for_byte(workdir):
    config = str(workdir / "run.json")
    data = str(workdir / "sim.csv")
    assert main(["simulate", "--config", config, "--out", data]) == EXIT_OK

    outputs = []
    for threads, name in ((1, "a.csv"), (3, "b.csv")):
        path = workdir / name
        argv = ["forecast", "--config", config, "--data", data, "--out", str(path), "--threads", str(threads)]
        assert main(argv) == EXIT_OK
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]


def test_overrides_change_the_metadata(workdir):
    config = str(workdir / "run.json")
    data = str(workdir / "sim.csv")
    main(["simulate", "--config", config, "--out", data, "--seed", "5"])
    assert json.loads((workdir / "sim.meta.json").read_text())["seed"] == 5

    path = workdir / "fc.csv"
    argv = ["forecast", "--config", config, "--data", data, "--out", str(path), "--horizon", "2", "--seed", "9"]
    assert main(argv) == EXIT_OK
    assert len(pd.read_csv(path)) == 2
    assert json.loads((workdir / "fc.meta.json").read_text())["seed"] == 9


def test_invalid_dataset_exits_2(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("y\n" + "\n".join(["0.5"] * 16 + ["1.2"] + ["0.5"] * 3) + "\n")
    assert main(["fit", "--data", str(path)]) == EXIT_VALIDATION


def test_unknown_config_key_exits_2(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": {"order": [1, 1]}}))
    assert main(["fit", "--config", str(path), "--data", str(tmp_path / "x.csv")]) == EXIT_VALIDATION


def test_bad_order_exits_2(workdir):
    assert main(["fit", "--data", str(workdir / "x.csv"), "--order", "one"]) == EXIT_VALIDATION


def test_missing_files_exit_4(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "absent.csv")]) == EXIT_IO
    assert main(["fit", "--config", str(tmp_path / "absent.json"), "--data", "x.csv"]) == EXIT_IO
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["fit", "--config", str(broken), "--data", "x.csv"]) == EXIT_IO


def test_diagnose_needs_a_model(workdir):
    assert main(["diagnose", "--data", str(workdir / "x.csv")]) == EXIT_VALIDATION


def test_mc_writes_one_report_per_scenario(workdir):
    out = workdir / "mc"
    argv = ["mc", "--config", str(workdir / "run.json"), "--out", str(out), "--threads", "2"]
    assert main(argv) == EXIT_OK
    report = json.loads((out / "scenario_0.json").read_text())
    assert report["replicas"] == 2
    assert report["kind"] == "point_estimation"
    assert (out / "scenario_0_table.csv").exists()


def _strict_loads(text):
    def reject(constant):
        raise ValueError(f"non-standard JSON constant {constant}")

    return json.loads(text, parse_constant=reject)


def test_fit_on_a_short_series_skips_normality_tests(tmp_path):
    data = tmp_path / "short.csv"
    data.write_text("y\n" + "\n".join(str(v) for v in [0.31, 0.55, 0.42, 0.61, 0.37, 0.48]) + "\n")
    model = tmp_path / "model.json"
    assert main(["fit", "--data", str(data), "--out", str(model)]) == EXIT_OK
    diag = _strict_loads(model.read_text())["diagnostics"]
    assert diag["n"] == 6
    for test in ("ks", "ad"):
        assert diag[test]["p_value"] is None
        assert "at least 8" in diag[test]["skipped"]
    assert main(["diagnose", "--data", str(data), "--model", str(model)]) == EXIT_OK


def test_json_output_has_no_nan(workdir):
    config = dict(RUN, scenarios=[dict(RUN["scenarios"][0], replicas=1)])
    (workdir / "one.json").write_text(json.dumps(config))
    out = workdir / "mc"
    assert main(["mc", "--config", str(workdir / "one.json"), "--out", str(out)]) == EXIT_OK
    report = _strict_loads((out / "scenario_0.json").read_text())
    assert report["table"]["converged"]["alpha"]["sd"] is None


def test_dumps_maps_non_finite_values_to_null():
    payload = {"a": float("nan"), "b": [1.0, np.inf, np.float64(-np.inf)], "c": np.array([0.5, np.nan])}
    assert _strict_loads(_dumps(payload)) == {"a": None, "b": [1.0, None, None], "c": [0.5, None]}
