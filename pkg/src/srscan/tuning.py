"""Visit-budget arithmetic for choosing ``(epsilon, m, n_iter)``.

A true signal ``j*`` is selected with probability roughly ``c/p`` per draw,
where ``c = (1 - epsilon) R + epsilon`` and ``R`` is the ratio of the signal
marginal correlation to the mean null marginal correlation.  Over a run it
is visited ``V = n_iter * m * c / p`` times in expectation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

MIN_VISITS = 1000.0


@dataclass(frozen=True)
class TuningReport:
    p: int
    epsilon: float
    R: float
    c: float
    n_iter: int
    m: int
    expected_visits: float
    feasible: bool
    rho_signal: float | None = None
    rho_null_bar: float | None = None


def theoretical_signal_rho(rho_block: float) -> float:
    """Population |cor(x_j, y)| of a signal in the balanced +-1, k=10 block design."""
    if not 0.0 <= rho_block < 1.0:
        raise ValueError("rho_block must lie in [0, 1)")
    return abs(1.0 - rho_block) / math.sqrt(11.0 - 10.0 * rho_block)


def null_rho_bar(n: int) -> float:
    """Mean of a half-normal |N(0, 1/n)|."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return math.sqrt(2.0 / (math.pi * n))


def empirical_R(rho, k0: int = 20) -> float:
    """Mean of the top-``k0`` scores over the mean of the rest."""
    rho = np.sort(np.asarray(rho, dtype=np.float64))[::-1]
    p = rho.size
    if not 1 <= k0 < p:
        raise ValueError(f"k0 must lie in [1, {p - 1}]")
    rest = rho[k0:].mean()
    if rest <= 0:
        return math.inf
    return float(rho[:k0].mean() / rest)


def concentration(epsilon: float, R: float) -> float:
    return (1.0 - epsilon) * R + epsilon


def visit_budget(p: int, epsilon: float, R: float, n_iter: int, m: int,
                 rho_signal=None, rho_null_bar=None) -> TuningReport:
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")
    if p < 1 or n_iter < 1 or m < 1 or R < 0:
        raise ValueError("p, n_iter, m must be positive and R non-negative")
    c = concentration(epsilon, R)
    V = n_iter * m * c / p
    return TuningReport(p=p, epsilon=epsilon, R=R, c=c, n_iter=n_iter, m=m, expected_visits=V,
                        feasible=V >= MIN_VISITS, rho_signal=rho_signal, rho_null_bar=rho_null_bar)


def required_n_iter(p: int, epsilon: float, R: float, m: int, V_target: float = MIN_VISITS) -> int:
    c = concentration(epsilon, R)
    return math.ceil(V_target * p / (c * m) - 1e-9)


def recommend_m(p: int, epsilon: float, R: float, n_iter: int, V_target: float = MIN_VISITS) -> int:
    """Smallest ``m`` with ``n_iter * m * c / p >= V_target``, capped at ``p``.

    Warns with the ``n_iter`` needed at ``m = p`` when even that is not enough.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")
    c = concentration(epsilon, R)
    # guard against 17.999999 -> 18 style float noise
    m = max(1, math.ceil(V_target * p / (c * n_iter) - 1e-9))
    if m > p:
        need = required_n_iter(p, epsilon, R, p, V_target)
        warnings.warn(
            f"visit target {V_target:g} unreachable with n_iter={n_iter} even at m=p={p}; "
            f"need n_iter >= {need}",
            RuntimeWarning, stacklevel=2,
        )
        m = p
    return m
