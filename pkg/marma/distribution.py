"""The Matsuoka distribution on (0,1).

Density ``f(x; p) = 2 sqrt(-p^3 ln(x) / pi) x^(p-1)`` for ``0 < x < 1`` and
shape ``p > 0``.  If ``X ~ M(p)`` then ``-ln X ~ Gamma(3/2, scale=1/p)``,
which is what every routine here leans on.

All functions accept scalars or numpy arrays and broadcast ``p`` against
their first argument.  Scalars in give Python floats out.
"""

import numpy as np
from scipy import special

from .exceptions import DomainError

GAMMA_SHAPE = 1.5
_LOG_CONST = np.log(2.0) - 0.5 * np.log(np.pi)  # ln(2 / sqrt(pi))
_ONE_MINUS = np.nextafter(1.0, 0.0)


def _as_output(value, *inputs):
    """Return a float when every input was scalar."""
    if all(np.ndim(v) == 0 for v in inputs):
        return float(value)
    return value


def _check_shape(p):
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise DomainError(f"Matsuoka shape must be positive and finite, got {p!r}.")
    return p


def _check_unit(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)) or np.any(~(x < 1)):
        raise DomainError(f"{name} must lie strictly inside (0,1), got {x!r}.")
    return x


def neg_log(x):
    """-ln(x), computed through log1p when x is close to 1."""
    x = np.asarray(x, dtype=float)
    near_one = x > 0.5
    # x - 1 is exact on [0.5, 1]
    return np.where(near_one, -np.log1p(np.where(near_one, x, 1.0) - 1.0), -np.log(np.where(near_one, 0.5, x)))


def log_pdf(x, p):
    """Log density of M(p) at x.

    Raises :class:`DomainError` outside (0,1) or for a non-positive shape;
    likelihood code must never evaluate at the boundary.
    """
    p = _check_shape(p)
    xa = _check_unit(x)
    t = neg_log(xa)
    out = _LOG_CONST + 1.5 * np.log(p) + 0.5 * np.log(t) - (p - 1.0) * t
    return _as_output(out, x, p)


def pdf(x, p):
    return _as_output(np.exp(log_pdf(x, p)), x, p)


def cdf(x, p):
    """Distribution function, total on the real line.

    Equals the regularized upper incomplete gamma ``Q(3/2, -p ln x)`` on
    (0,1), 0 at or below 0 and 1 at or above 1.
    """
    pa = _check_shape(p)
    xa = np.asarray(x, dtype=float)
    inside = (xa > 0) & (xa < 1)
    t = neg_log(np.where(inside, xa, 0.5))
    out = np.where(inside, special.gammaincc(GAMMA_SHAPE, pa * t), np.where(xa >= 1, 1.0, 0.0))
    return _as_output(out, x, p)


def quantile(q, p):
    """Quantile function; ``quantile(0) = 0`` and ``quantile(1) = 1``."""
    pa = _check_shape(p)
    qa = np.asarray(q, dtype=float)
    if np.any(~(qa >= 0)) or np.any(~(qa <= 1)):
        raise DomainError(f"Probability must lie in [0,1], got {q!r}.")
    inside = (qa > 0) & (qa < 1)
    t = special.gammainccinv(GAMMA_SHAPE, np.where(inside, qa, 0.5)) / pa
    out = np.where(inside, np.exp(-t), np.where(qa >= 1, 1.0, 0.0))
    return _as_output(out, q, p)


def sample(p, rng, count=None):
    """Draw from M(p) as ``exp(-G)`` with ``G ~ Gamma(3/2, scale=1/p)``.

    Parameters
    ----------
    p : float or array_like
        Shape(s).  An array draws one variate per element unless ``count``
        says otherwise.
    rng : numpy.random.Generator
        Seeded stream; identical streams give identical draws.
    count : int, optional
        Number of draws.

    Returns
    -------
    numpy.ndarray
        Draws, clipped into the open interval so that ``g(x)`` stays finite.
    """
    pa = _check_shape(p)
    if count is not None and count < 1:
        raise DomainError(f"count must be a positive integer, got {count}.")
    size = count if count is not None else (pa.shape or None)
    return from_standard_gamma(rng.standard_gamma(GAMMA_SHAPE, size=size), pa)


def from_standard_gamma(g, p):
    """Map Gamma(3/2, 1) variates to M(p) variates, ``exp(-g / p)``.

    Lets callers pre-draw the randomness and choose shapes later.
    """
    draws = np.exp(-np.asarray(g, dtype=float) / p)
    return np.clip(draws, np.finfo(float).tiny, _ONE_MINUS)


def moment(k, p):
    """Raw moment ``E(X^k) = (p / (p + k))^(3/2)``."""
    if k <= 0:
        raise DomainError(f"Moment order must be positive, got {k}.")
    pa = _check_shape(p)
    return _as_output((pa / (pa + k)) ** 1.5, p)


def mean(p):
    return moment(1, p)


def variance(p):
    pa = _check_shape(p)
    out = (pa / (pa + 2.0)) ** 1.5 - (pa / (pa + 1.0)) ** 3
    return _as_output(out, p)


def skewness(p):
    """Skewness from the first three raw moments."""
    pa = _check_shape(p)
    m1, m2, m3 = ((pa / (pa + k)) ** 1.5 for k in (1, 2, 3))
    central3 = m3 - 3.0 * m1 * m2 + 2.0 * m1**3
    return _as_output(central3 / (m2 - m1**2) ** 1.5, p)


def log_mean(p):
    """``E(ln X) = -3 / (2p)``."""
    pa = _check_shape(p)
    return _as_output(-1.5 / pa, p)


def sufficient_statistic(x):
    """Natural sufficient statistic ``ln x`` of the exponential family form."""
    xa = _check_unit(x)
    return _as_output(-neg_log(xa), x)


def log_partition(p):
    """Cumulant function ``a(p) = -(3/2) ln p`` of the exponential family form."""
    pa = _check_shape(p)
    return _as_output(-1.5 * np.log(pa), p)


def shape_to_mean(p):
    """Mean map ``u(p) = (p / (1 + p))^(3/2)``."""
    pa = _check_shape(p)
    return _as_output(np.exp(1.5 * (np.log(pa) - np.log1p(pa))), p)


def mean_to_shape(mu):
    """Inverse mean map ``u^-1(mu) = mu^(2/3) / (1 - mu^(2/3))``."""
    mua = _check_unit(mu, name="mu")
    log_m23 = (2.0 / 3.0) * np.log(mua)
    return _as_output(np.exp(log_m23) / -np.expm1(log_m23), mu)
