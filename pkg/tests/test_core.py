import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from marma import core, distribution
from marma.core import ModelSpec, ParamVector, SeriesData
from marma.exceptions import DimensionError, DomainError
from marma.links import LINKS, g, g_inv
from marma.simulation import ScenarioSpec, simulate

ORDERS = [(0, 0, 1), (1, 0, 0), (0, 1, 1), (1, 1, 1), (2, 1, 0), (1, 2, 1), (2, 2, 1)]


def _config(p, q, r, link, n=200, seed=0):
    spec = ModelSpec(p, q, r, link)
    gamma = ParamVector(0.3, [0.4] * r, [0.3, -0.15][:p], [0.25, 0.1][:q])
    scenario = ScenarioSpec(spec, gamma, n=n, burn_in=50, covariates=[("sin", 50)] * r, seed=seed)
    return spec, gamma, simulate(scenario)


def _loop_eta(gamma, data, spec):
    """Direct transcription of the recursion, one time step at a time."""
    gy = g(data.y, spec.link)
    xb = data.x @ gamma.beta
    x0 = data.x[: spec.p_ar].mean(axis=0) if spec.p_ar and data.r else np.zeros(data.r)
    eta = np.zeros(data.n)
    r = np.zeros(data.n)
    for t in range(data.n):
        value = gamma.alpha + xb[t]
        for i in range(1, spec.p_ar + 1):
            if t - i >= 0:
                value += gamma.phi[i - 1] * (gy[t - i] - xb[t - i])
            else:
                value += gamma.phi[i - 1] * (0.0 - x0 @ gamma.beta)
        for j in range(1, spec.q_ma + 1):
            if t - j >= 0:
                value += gamma.theta[j - 1] * r[t - j]
        eta[t] = value
        r[t] = gy[t] - value
    return eta


def _perturbed(gamma, spec, seed):
    shift = np.random.default_rng(seed).normal(scale=0.05, size=spec.n_params)
    return ParamVector.from_array(gamma.to_array() + shift, spec)


def test_param_vector_layout():
    spec = ModelSpec(2, 1, 1, "logit")
    gamma = ParamVector.from_array([1, 2, 3, 4, 5], spec)
    assert gamma.alpha == 1.0
    assert gamma.beta.tolist() == [2.0]
    assert gamma.phi.tolist() == [3.0, 4.0]
    assert gamma.theta.tolist() == [5.0]
    assert spec.names() == ["alpha", "beta_1", "phi_1", "phi_2", "theta_1"]
    assert gamma.as_dict(spec)["phi_2"] == 4.0
    with pytest.raises(DimensionError):
        ParamVector.from_array([1, 2], spec)
    with pytest.raises(DimensionError):
        ModelSpec(-1, 0)


def test_series_data_validation():
    with pytest.raises(DomainError):
        SeriesData([0.2, 1.0])
    with pytest.raises(DimensionError):
        SeriesData([0.2, 0.3], np.zeros((3, 1)))
    assert SeriesData([0.2, 0.3, 0.4]).truncate(2).n == 2


def test_degenerate_orders_give_regression():
    spec = ModelSpec(0, 0, 1, "logit")
    x = np.linspace(-1, 1, 6)
    data = SeriesData(np.linspace(0.2, 0.7, 6), x)
    out = core.filter_series(ParamVector(0.3, [0.7]), data, spec)
    assert_allclose(out.eta, 0.3 + 0.7 * x, rtol=0, atol=1e-15)


def test_ar1_hand_recursion():
    spec = ModelSpec(1, 0, 0, "cloglog")
    data = SeriesData([0.3, 0.6])
    out = core.filter_series(ParamVector(0.5, phi=[0.2]), data, spec)
    assert out.eta[0] == pytest.approx(0.5)
    assert out.eta[1] == pytest.approx(0.5 + 0.2 * g(0.3, "cloglog"))


def test_ma1_derivative_hand_recursion():
    spec = ModelSpec(0, 1, 0, "logit")
    data = SeriesData([0.3, 0.6, 0.45, 0.5])
    theta = 0.4
    out = core.filter_series(ParamVector(0.1, theta=[theta]), data, spec)
    r = out.resid_r
    d1 = 0.0
    d2 = r[0] - theta * d1
    d3 = r[1] - theta * d2
    assert_allclose(out.deriv[:3, 1], [d1, d2, d3], rtol=1e-14)


def test_intercept_derivative_without_ma_terms():
    spec, gamma, data = _config(2, 0, 1, "logit", n=50)
    out = core.filter_series(gamma, data, spec)
    assert np.all(out.deriv[:, 0] == 1.0)


@pytest.mark.parametrize("p, q, r", ORDERS)
def test_filter_matches_loop_oracle(p, q, r):
    spec, gamma, data = _config(p, q, r, "cloglog", n=60)
    out = core.filter_series(gamma, data, spec)
    assert_allclose(out.eta, _loop_eta(gamma, data, spec), rtol=0, atol=1e-12)
    assert_allclose(out.mu, g_inv(out.eta, spec.link))
    assert_allclose(out.shape, distribution.mean_to_shape(out.mu))


def test_filter_matches_loop_oracle_on_short_series():
    spec, gamma, data = _config(1, 1, 0, "logit", n=5)
    assert_allclose(core.filter_series(gamma, data, spec).eta, _loop_eta(gamma, data, spec), atol=1e-12)


@pytest.mark.parametrize("p, q, r", ORDERS)
def test_derivatives_match_finite_differences(p, q, r):
    spec, gamma, data = _config(p, q, r, "loglog", n=50)
    out = core.filter_series(gamma, data, spec)
    base = gamma.to_array()
    h = 1e-6
    for j in range(spec.n_params):
        step = np.zeros_like(base)
        step[j] = h
        up = core.filter_series(base + step, data, spec, derivatives=False).eta
        down = core.filter_series(base - step, data, spec, derivatives=False).eta
        assert_allclose(out.deriv[:, j], (up - down) / (2 * h), rtol=1e-6, atol=1e-7)


def test_loglik_equals_sum_of_log_densities():
    spec, gamma, data = _config(1, 1, 1, "cloglog", n=200)
    out = core.filter_series(gamma, data, spec, derivatives=False)
    expected = np.sum(distribution.log_pdf(data.y, out.shape))
    assert core.loglik(gamma, data, spec) == pytest.approx(expected, rel=1e-10)


def test_loglik_single_observation():
    spec = ModelSpec(0, 0, 0, "cloglog")
    data = SeriesData([0.42])
    mu = 1.0 - np.exp(-1.0)
    expected = distribution.log_pdf(0.42, distribution.mean_to_shape(mu))
    assert core.loglik(ParamVector(0.0), data, spec) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("link, order", list(itertools.product(LINKS, ORDERS)))
def test_score_matches_finite_differences(link, order):
    spec, gamma, data = _config(*order, link, n=200, seed=3)
    at = _perturbed(gamma, spec, seed=hash(order) % 1000)
    analytic = core.score(at, data, spec)
    base = at.to_array()
    h = 1e-6
    numeric = np.empty_like(base)
    for j in range(base.size):
        step = np.zeros_like(base)
        step[j] = h
        numeric[j] = (core.loglik(base + step, data, spec) - core.loglik(base - step, data, spec)) / (2 * h)
    assert np.linalg.norm(numeric - analytic) < 1e-5 * np.linalg.norm(analytic)


def test_score_and_information_skip_clamped_times():
    rng = np.random.default_rng(17)
    n = 60
    x = 0.1 * rng.normal(size=(n, 1))
    y = rng.uniform(0.2, 0.8, size=n)
    x[30, 0] = -40.0
    y[30] = 1e-20
    spec = ModelSpec(1, 1, 1, "cloglog")
    data = SeriesData(y, x)
    at = ParamVector(0.2, [1.0], [0.3], [0.2])

    filtered = core.filter_series(at, data, spec)
    assert filtered.clamp_count >= 1
    assert filtered.clamped[30]

    base = at.to_array()
    h = 1e-6
    numeric = np.empty_like(base)
    for j in range(base.size):
        step = np.zeros_like(base)
        step[j] = h
        numeric[j] = (core.loglik(base + step, data, spec) - core.loglik(base - step, data, spec)) / (2 * h)
    assert_allclose(core.score(at, data, spec), numeric, rtol=1e-4, atol=1e-6)

    keep = ~filtered.clamped
    mu = filtered.mu[keep]
    weights = core.info_mu(mu) / spec.link.g_prime(mu) ** 2
    deriv = filtered.deriv[keep]
    assert_allclose(core.cond_info(at, data, spec), deriv.T @ (weights[:, None] * deriv), rtol=1e-10)


def test_cond_info_symmetric_psd():
    spec, gamma, data = _config(2, 2, 1, "logit", n=200)
    info = core.cond_info(gamma, data, spec)
    assert_allclose(info, info.T)
    assert np.linalg.eigvalsh(info).min() > -1e-9 * np.abs(info).max()


def test_score_mu_is_derivative_of_loglik_terms():
    y = np.array([0.1, 0.4, 0.8])
    mu = np.array([0.3, 0.5, 0.7])
    h = 1e-7
    numeric = (core.loglik_terms(y, mu + h) - core.loglik_terms(y, mu - h)) / (2 * h)
    assert_allclose(core.score_mu(y, mu), numeric, rtol=1e-6)


def _printed_info(mu):
    m = mu ** (2.0 / 3.0)
    return (4.0 - 10.0 * m) / (3.0 * (1.0 - m) ** 2 * mu**2)


@pytest.mark.parametrize("mu", [0.2, 0.5, 0.8])
def test_information_identity(mu):
    rng = np.random.default_rng(int(mu * 100))
    y = distribution.sample(distribution.mean_to_shape(mu), rng, 100_000)

    h = core.score_mu(y, mu)
    assert abs(h.mean()) < 3 * h.std(ddof=1) / np.sqrt(h.size)

    centered = h - h.mean()
    var = np.mean(centered**2)
    var_se = np.sqrt((np.mean(centered**4) - var**2) / h.size)
    assert abs(var - core.info_mu(mu)) < 3 * var_se

    delta = 1e-4
    second = (
        core.loglik_terms(y, mu + delta) - 2 * core.loglik_terms(y, mu) + core.loglik_terms(y, mu - delta)
    ) / delta**2
    assert abs(-second.mean() - core.info_mu(mu)) < 3 * second.std(ddof=1) / np.sqrt(y.size)


def test_info_mu_positive_where_printed_form_is_not():
    grid = np.linspace(0.01, 0.99, 99)
    assert np.all(core.info_mu(grid) > 0)
    assert _printed_info(0.8) < 0
    assert core.info_mu(0.8) > 0


def test_non_finite_eta_is_reported():
    spec = ModelSpec(0, 1, 0, "logit")
    data = SeriesData(np.full(1000, 0.5) + np.tile([0.3, -0.3], 500))
    with pytest.raises(ArithmeticError) as err:
        core.filter_series(ParamVector(0.0, theta=[-5.0]), data, spec, derivatives=False)
    assert err.value.index >= 1


@pytest.mark.slow
def test_information_per_observation_stabilizes():
    spec = ModelSpec(1, 1, 0, "logit")
    gamma = ParamVector(0.0, phi=[0.3], theta=[0.2])
    data = simulate(ScenarioSpec(spec, gamma, n=4000, seed=5))
    small = core.cond_info(gamma, data.truncate(2000), spec) / 2000
    large = core.cond_info(gamma, data, spec) / 4000
    assert np.abs(small - large).max() < 0.05 * max(1.0, np.abs(large).max())
