import numpy as np
import pytest
from numpy.testing import assert_allclose

from marma.exceptions import DomainError
from marma.links import EPS, LINKS, LinkSpec, as_link, clamp_mask, clip_to_band, g, g_inv, g_prime


@pytest.mark.parametrize("link", LINKS)
def test_inverse_roundtrip(link):
    x = np.linspace(0.01, 0.99, 99)
    assert_allclose(g_inv(g(x, link), link), x, rtol=1e-12)


@pytest.mark.parametrize("link", LINKS)
def test_links_increase(link):
    x = np.linspace(0.01, 0.99, 99)
    assert np.all(np.diff(g(x, link)) > 0)
    assert np.all(g_prime(x, link) > 0)


@pytest.mark.parametrize("link", LINKS)
def test_derivative_matches_finite_differences(link):
    x = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    numeric = (g(x + h, link) - g(x - h, link)) / (2 * h)
    assert_allclose(g_prime(x, link), numeric, rtol=1e-6)


@pytest.mark.parametrize("link", LINKS)
def test_inverse_derivative_is_reciprocal_of_g_prime(link):
    eta = np.linspace(-2.0, 1.5, 15)
    h = 1e-6
    numeric = (g_inv(eta + h, link) - g_inv(eta - h, link)) / (2 * h)
    assert_allclose(1.0 / g_prime(g_inv(eta, link), link), numeric, rtol=1e-6)


def test_clamp_mask_and_band():
    mu = g_inv(np.array([-60.0, 0.0, 60.0]), "logit")
    assert clamp_mask(mu).tolist() == [True, False, True]
    y, clipped = clip_to_band(np.array([0.0, 1e-300, 0.5, 1.0]))
    assert clipped == 3
    assert_allclose(y, [EPS, EPS, 0.5, 1.0 - EPS])
    assert clip_to_band(0.25) == (0.25, 0)


def test_known_values():
    assert g(0.5, "logit") == 0.0
    assert g(0.5, "loglog") == pytest.approx(-np.log(np.log(2.0)))
    assert g(0.5, "cloglog") == pytest.approx(np.log(np.log(2.0)))
    assert g_inv(0.0, "cloglog") == pytest.approx(1.0 - np.exp(-1.0))


def test_clamping_is_counted():
    mu, clamps = g_inv(np.array([-60.0, 0.0, 60.0]), "logit", return_clamps=True)
    assert clamps == 2
    assert mu[0] == EPS
    assert mu[2] == 1.0 - EPS
    mu, clamps = g_inv(10.0, "cloglog", return_clamps=True)
    assert clamps == 1 and mu == 1.0 - EPS


def test_errors():
    with pytest.raises(DomainError):
        LinkSpec("probit")
    with pytest.raises(DomainError):
        g(0.0, "logit")
    with pytest.raises(DomainError):
        g_prime(1.0, "loglog")
    with pytest.raises(DomainError):
        g_inv(np.nan, "logit")


def test_as_link_accepts_names_and_specs():
    assert as_link(" LogLog ").kind == "loglog"
    spec = LinkSpec("logit")
    assert as_link(spec) is spec
    assert spec.g(0.5) == 0.0
    assert str(LinkSpec()) == "cloglog"
