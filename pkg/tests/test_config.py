import json

import pytest

from marma.config import (
    ENV_THREADS,
    FitConfig,
    RunConfig,
    ScenarioConfig,
    config_from_dict,
    config_hash,
    load_config,
)
from marma.exceptions import InputFileError, ValidationError

EXAMPLE = {
    "model": {"p_ar": 1, "q_ma": 1, "link": "cloglog", "harmonics": [["sin", 100]]},
    "fit": {"max_evals": 500, "fixed": {"theta_1": 0.0}},
    "forecast": {"horizon": 5, "boot": 200, "level": 0.1, "seed": 3},
    "scenarios": [
        {
            "p_ar": 1,
            "q_ma": 1,
            "gamma": {"alpha": 0.5, "beta_1": -0.5, "phi_1": 0.2, "theta_1": -0.4},
            "covariates": [["sin", 100]],
            "replicas": 10,
        }
    ],
}


def test_defaults():
    config = load_config(None)
    assert config == RunConfig()
    assert config.model.link == "cloglog"


def test_from_dict():
    config = config_from_dict(EXAMPLE)
    assert config.model.harmonics == (("sin", 100),)
    assert config.model.to_spec().r_cov == 1
    assert config.fit.to_options().fixed == {"theta_1": 0.0}
    assert config.forecast.boot == 200
    scenario = config.scenarios[0].to_scenario()
    assert scenario.gamma.phi.tolist() == [0.2]
    assert scenario.covariates == (("sin", 100.0),)


def test_unknown_keys_name_their_path():
    with pytest.raises(ValidationError, match="fit.max_iter"):
        config_from_dict({"fit": {"max_iter": 3}})
    with pytest.raises(ValidationError, match=r"scenarios\[0\].rho"):
        config_from_dict({"scenarios": [{"rho": 1}]})
    with pytest.raises(ValidationError, match="colour"):
        config_from_dict({"colour": "red"})


def test_unknown_study():
    with pytest.raises(ValidationError):
        config_from_dict({"scenarios": [{"study": "bogus"}]})


def test_scenario_gamma_must_match_the_model():
    with pytest.raises(ValidationError, match="theta_1"):
        ScenarioConfig(p_ar=1, q_ma=1, gamma={"alpha": 0.1, "phi_1": 0.2}).to_scenario()


def test_fit_order_overrides_fitted_model():
    scenario = ScenarioConfig(p_ar=1, q_ma=1, fit_order=(0, 0))
    assert (scenario.fit_spec().p_ar, scenario.fit_spec().q_ma) == (0, 0)


def test_thread_precedence(monkeypatch):
    config = RunConfig(threads=2)
    monkeypatch.delenv(ENV_THREADS, raising=False)
    assert RunConfig().resolve_threads() == 1
    assert config.resolve_threads() == 2
    monkeypatch.setenv(ENV_THREADS, "3")
    assert config.resolve_threads() == 3
    assert config.resolve_threads(5) == 5


def test_bad_thread_environment(monkeypatch):
    monkeypatch.setenv(ENV_THREADS, "many")
    with pytest.raises(ValidationError):
        RunConfig().resolve_threads()
    monkeypatch.setenv(ENV_THREADS, "0")
    with pytest.raises(ValidationError):
        RunConfig().resolve_threads()


def test_config_hash_is_stable(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(EXAMPLE))
    first = config_hash(load_config(path))
    assert first == config_hash(config_from_dict(json.loads(json.dumps(EXAMPLE))))
    assert len(first) == 64
    assert first != config_hash(RunConfig(fit=FitConfig(max_evals=501)))


def test_bad_json_reports_the_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "fit": {\n    "max_evals": ,\n  }\n}\n')
    with pytest.raises(InputFileError) as info:
        load_config(path)
    assert info.value.line == 3
    assert isinstance(info.value, OSError)


def test_missing_file():
    with pytest.raises(OSError):
        load_config("/nonexistent/run.json")
