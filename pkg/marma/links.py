"""Link functions connecting the conditional mean to the linear predictor.

Three increasing links on (0,1) are available by name::

    logit    g(x) = ln(x / (1 - x))
    cloglog  g(x) = ln(-ln(1 - x))
    loglog   g(x) = -ln(-ln(x))

``g_inv`` clamps its output to ``[EPS, 1 - EPS]`` so downstream log terms
stay finite; callers that care ask for the number of clamp events.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .distribution import neg_log
from .exceptions import DomainError

EPS = 2.0**-48
LINKS = ("logit", "cloglog", "loglog")


@dataclass(frozen=True)
class LinkSpec:
    kind: str = "cloglog"

    def __post_init__(self):
        if self.kind not in LINKS:
            raise DomainError(f"Unknown link {self.kind!r}; choose one of {', '.join(LINKS)}.")

    def g(self, x):
        return g(x, self)

    def g_inv(self, eta, return_clamps=False):
        return g_inv(eta, self, return_clamps=return_clamps)

    def g_prime(self, x):
        return g_prime(x, self)

    def __str__(self):
        return self.kind


def as_link(link):
    """Accept a LinkSpec or a link name."""
    if isinstance(link, LinkSpec):
        return link
    return LinkSpec(str(link).strip().lower())


def _unit(x):
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)) or np.any(~(xa < 1)):
        raise DomainError(f"Link argument must lie strictly inside (0,1), got {x!r}.")
    return xa


def _out(value, x):
    return float(value) if np.ndim(x) == 0 else value


def g(x, link):
    kind = as_link(link).kind
    xa = _unit(x)
    if kind == "logit":
        out = special.logit(xa)
    elif kind == "cloglog":
        out = np.log(-np.log1p(-xa))
    else:
        out = -np.log(neg_log(xa))
    return _out(out, x)


def g_inv(eta, link, return_clamps=False):
    """Inverse link, clamped into ``[EPS, 1 - EPS]``.

    With ``return_clamps=True`` returns ``(mu, n_clamped)``.
    """
    kind = as_link(link).kind
    ea = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(ea)):
        raise DomainError(f"Linear predictor must be finite, got {eta!r}.")
    if kind == "logit":
        mu = special.expit(ea)
    elif kind == "cloglog":
        mu = -np.expm1(-np.exp(ea))
    else:
        mu = np.exp(-np.exp(-ea))
    clamped = (mu < EPS) | (mu > 1.0 - EPS)
    mu = np.clip(mu, EPS, 1.0 - EPS)
    mu = _out(mu, eta)
    if return_clamps:
        return mu, int(np.count_nonzero(clamped))
    return mu


def g_prime(x, link):
    """Derivative ``g'(x)``; strictly positive for every link."""
    kind = as_link(link).kind
    xa = _unit(x)
    if kind == "logit":
        out = 1.0 / (xa * (1.0 - xa))
    elif kind == "cloglog":
        out = 1.0 / (-(1.0 - xa) * np.log1p(-xa))
    else:
        out = 1.0 / (xa * neg_log(xa))
    return _out(out, x)


def clamp_mask(mu):
    """Where ``g_inv`` output sits on the clamp; there mu is flat in eta."""
    mu = np.asarray(mu, dtype=float)
    return (mu <= EPS) | (mu >= 1.0 - EPS)


def clip_to_band(y):
    """Clip observations into ``[EPS, 1 - EPS]``; returns ``(y, n_clipped)``.

    Draws outside the band have a link value no fitted mean can reach, and
    fed back through the AR terms they compound step after step.
    """
    ya = np.asarray(y, dtype=float)
    outside = (ya < EPS) | (ya > 1.0 - EPS)
    return _out(np.clip(ya, EPS, 1.0 - EPS), y), int(np.count_nonzero(outside))
