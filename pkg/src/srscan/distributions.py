"""Random variates used by the sampler.

Standard families delegate to ``numpy.random.Generator``; the inverse
Gaussian is drawn with the Michael-Schucany-Haas transformation so that the
local-scale update can be vectorized over the active set.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

BETA2_FLOOR = 1e-12


def make_rng(seed: int, chain_id: int = 0) -> np.random.Generator:
    """Independent PCG64 stream keyed by ``(seed, chain_id)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chain_id),))
    return np.random.Generator(np.random.PCG64(ss))


def _positive(name, value):
    v = np.asarray(value, dtype=np.float64)
    if not np.all(v > 0) or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be positive and finite")


def sample_inverse_gaussian(mu, lam, rng: np.random.Generator, size=None):
    """Draw from IG(mu, lam), density ~ x^{-3/2} exp(-lam x/(2 mu^2) - lam/(2x)).

    Michael, Schucany & Haas (1976): one chi-square(1) draw gives the smaller
    root ``x1`` of the quadratic; return ``x1`` with probability
    ``mu/(mu + x1)`` and ``mu^2/x1`` otherwise.  Non-finite or non-positive
    results fall back to ``mu``.
    """
    mu = np.asarray(mu, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if size is None:
        size = np.broadcast(mu, lam).shape
    nu = rng.standard_normal(size)
    r = mu * nu * nu / (2.0 * lam)
    # algebraically equal to mu + mu^2 y/(2 lam) - mu/(2 lam) sqrt(4 mu lam y + mu^2 y^2), without cancellation
    x1 = mu / (1.0 + r + np.sqrt(r * (r + 2.0)))
    u = rng.random(size)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        x = np.where(u <= mu / (mu + x1), x1, mu * mu / x1)
    bad = ~np.isfinite(x) | (x <= 0)
    if np.any(bad):
        x = np.where(bad, np.broadcast_to(mu, np.shape(x)), x)
    if np.ndim(x) == 0:
        return float(x)
    return x


def sample_gig_half(a, b, rng: np.random.Generator, size=None):
    """Draw ``x ~ GIG(p=1/2, a, b)``, kernel ``x^{-1/2} exp(-(a x + b/x)/2)``.

    Sampled as ``1/w`` with ``w ~ IG(sqrt(a/b), a)``; ``b`` is floored at
    1e-12 to keep the mean finite.
    """
    a = np.asarray(a, dtype=np.float64)
    _positive("a", a)
    b = np.maximum(np.asarray(b, dtype=np.float64), BETA2_FLOOR)
    w = sample_inverse_gaussian(np.sqrt(a / b), a, rng, size=size)
    return 1.0 / w


def sample_gamma(shape, rate, rng: np.random.Generator, size=None):
    _positive("shape", shape)
    _positive("rate", rate)
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=np.float64), size=size)


def sample_inv_gamma(shape, scale, rng: np.random.Generator, size=None):
    _positive("shape", shape)
    _positive("scale", scale)
    return np.asarray(scale, dtype=np.float64) / rng.gamma(shape, 1.0, size=size)


def sample_beta(a, b, rng: np.random.Generator, size=None):
    _positive("a", a)
    _positive("b", b)
    return rng.beta(a, b, size=size)


def sample_normal(mean, sd, rng: np.random.Generator, size=None):
    if np.any(np.asarray(sd) < 0):
        raise ValueError("sd must be non-negative")
    return rng.normal(mean, sd, size=size)


def sample_bernoulli(prob, rng: np.random.Generator, size=None):
    prob = np.asarray(prob, dtype=np.float64)
    if np.any((prob < 0) | (prob > 1)):
        raise ValueError("prob must lie in [0, 1]")
    return rng.random(size if size is not None else prob.shape) < prob


def sample_exponential(rate, rng: np.random.Generator, size=None):
    _positive("rate", rate)
    return rng.exponential(1.0 / np.asarray(rate, dtype=np.float64), size=size)


def sample_mvn_from_precision(precision, linear_term, rng: np.random.Generator) -> np.ndarray:
    """Draw from N(P^{-1} b, P^{-1}) given precision ``P`` and linear term ``b``.

    With ``R'R = P`` the mean solves two triangular systems and the noise is
    ``R^{-1} e``.  Raises ``numpy.linalg.LinAlgError`` if ``P`` is not SPD.
    """
    P = np.asarray(precision, dtype=np.float64)
    b = np.asarray(linear_term, dtype=np.float64)
    k = b.shape[0]
    if k == 0:
        return np.zeros(0)
    R = linalg.cholesky(P, lower=False, check_finite=False)
    w = linalg.solve_triangular(R, b, trans="T", lower=False, check_finite=False)
    mean = linalg.solve_triangular(R, w, lower=False, check_finite=False)
    eps = rng.standard_normal(k)
    return mean + linalg.solve_triangular(R, eps, lower=False, check_finite=False)
