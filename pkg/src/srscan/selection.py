"""Posterior summaries and selection rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class PipSummary:
    pip: np.ndarray
    visits: np.ndarray
    beta_mean: np.ndarray
    beta_sd: np.ndarray
    k_hat: float
    k_star: int
    t_hat: float
    selected: np.ndarray
    median: np.ndarray
    n_kept: int


@dataclass(frozen=True)
class SelectionMetrics:
    tp: int
    fp: int
    fn: int
    sensitivity: float
    precision: float


def _check_pip(pip) -> np.ndarray:
    pip = np.asarray(pip, dtype=np.float64).reshape(-1)
    if pip.size == 0:
        raise ValueError("empty pip vector")
    if np.any(~np.isfinite(pip)) or np.any(pip < 0) or np.any(pip > 1):
        raise ValueError("pip values must lie in [0, 1]")
    return pip


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def khat_rule(pip):
    """Posterior-mean-size rule.

    Returns ``(k_hat, k_star, t_hat, selected)`` where ``k_hat`` is the sum of
    PIPs, ``k_star`` its rounded value truncated to ``[1, p]``, ``t_hat`` the
    ``k_star``-th largest PIP and ``selected`` the sorted 0-based indices with
    ``pip >= t_hat``.  Ties at a positive threshold are all kept.  A zero
    threshold would select every unvisited coordinate, so in that case the
    ``k_star`` largest PIPs are taken with ties broken by lowest index.
    """
    pip = _check_pip(pip)
    p = pip.size
    k_hat = float(np.sum(pip))
    k_star = max(1, min(p, round_half_up(k_hat)))
    order = np.argsort(-pip, kind="stable")
    t_hat = float(pip[order[k_star - 1]])
    if t_hat > 0:
        selected = np.flatnonzero(pip >= t_hat)
    else:
        selected = np.sort(order[:k_star])
    return k_hat, k_star, t_hat, selected


def median_model(pip) -> np.ndarray:
    pip = _check_pip(pip)
    return np.flatnonzero(pip >= 0.5)


def selection_metrics(selected, truth) -> SelectionMetrics:
    sel = {int(i) for i in selected}
    tru = {int(i) for i in truth}
    tp = len(sel & tru)
    fp = len(sel - tru)
    fn = len(tru - sel)
    sensitivity = tp / len(tru) if tru else 1.0
    if sel:
        precision = tp / len(sel)
    else:
        precision = 1.0 if not tru else 0.0
    return SelectionMetrics(tp, fp, fn, sensitivity, precision)


def summarize(counts, n_kept: int, visits, beta_sum, beta_sq_sum) -> PipSummary:
    """Build a :class:`PipSummary` from running sums over kept samples.

    ``beta_mean``/``beta_sd`` average over all kept draws, counting a zero
    whenever the coordinate was excluded.
    """
    if n_kept < 1:
        raise ValueError("no kept samples")
    pip = np.asarray(counts, dtype=np.float64) / n_kept
    beta_mean = np.asarray(beta_sum, dtype=np.float64) / n_kept
    var = np.asarray(beta_sq_sum, dtype=np.float64) / n_kept - beta_mean ** 2
    beta_sd = np.sqrt(np.maximum(var, 0.0))
    k_hat, k_star, t_hat, selected = khat_rule(pip)
    return PipSummary(
        pip=pip, visits=np.asarray(visits, dtype=np.int64), beta_mean=beta_mean, beta_sd=beta_sd,
        k_hat=k_hat, k_star=k_star, t_hat=t_hat, selected=selected,
        median=median_model(pip), n_kept=int(n_kept),
    )
