"""Collapsed spike-and-slab sampler: coordinate selection, z-updates and the
conditional updates of the remaining parameters.

One iteration is

1. refactorize the active-set workspace at the current scales;
2. z-scan: ``random_scan`` draws ``m`` distinct coordinates from fixed
   weights and Gibbs-updates each, ``full_sweep`` Metropolis-flips every
   coordinate in index order;
3. beta_A, 4. tau2, 5. sigma2, 6. kappa2, 7. pi, 8. (a_pi, b_pi).

beta_A comes right after the z-scan because tau2, sigma2 and kappa2 all
condition on it.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import distributions as rd
from .active import ActiveSetWorkspace, WorkspaceError, build_workspace
from .gram import ActiveColumns, MarginalStats, build_full_gram, precompute_marginals, standardize
from .model import PI_EDGE, ChainConfig, Dataset, Hyperparameters, ModelState, ScanMode, initialize_state, validate
from .selection import PipSummary, selection_metrics, summarize

log = logging.getLogger(__name__)


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScanWeights:
    w: np.ndarray
    epsilon: float
    rho_sum: float


@dataclass
class Counters:
    coordinate_updates: int = 0
    adds: int = 0
    drops: int = 0
    skipped_unstable: int = 0
    drop_refreshes: int = 0
    mh_proposed: int = 0
    mh_accepted: int = 0
    ab_proposed: int = 0
    ab_accepted: int = 0
    beta_retries: int = 0
    sse_clamped: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def compute_weights(rho, epsilon: float) -> ScanWeights:
    """Defensive mixture ``(1-eps) rho_j / sum(rho) + eps/p``."""
    rho = np.asarray(rho, dtype=np.float64)
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    p = rho.size
    rho_sum = float(rho.sum())
    if rho_sum <= 0.0:
        w = np.full(p, 1.0 / p)
    else:
        w = (1.0 - epsilon) * (rho / rho_sum) + epsilon / p
    w.setflags(write=False)
    return ScanWeights(w=w, epsilon=float(epsilon), rho_sum=rho_sum)


def sample_coordinates(weights: ScanWeights, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` distinct indices by successive weighted draws without replacement.

    ``Generator.choice`` with ``replace=False`` keeps first occurrences of
    repeated with-replacement draws, which is distributed exactly as
    draw-remove-renormalize.
    """
    p = weights.w.size
    if not 1 <= m <= p:
        raise ValueError(f"m must lie in [1, {p}]")
    return rng.choice(p, size=m, replace=False, p=weights.w)


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def log_prior_odds(pi: float) -> float:
    return math.log(pi) - math.log1p(-pi)


def _do_add(ws: ActiveSetWorkspace, state: ModelState, cols, prop) -> None:
    ws.apply_add(prop)
    cols.add(prop.j)
    state.z[prop.j] = True
    state.active.append(prop.j)
    state.beta_active = np.append(state.beta_active, 0.0)


def _do_drop(ws: ActiveSetWorkspace, state: ModelState, cols, prop) -> None:
    ws.apply_drop(prop)
    cols.drop(prop.pos)
    state.z[prop.j] = False
    del state.active[prop.pos]
    state.beta_active = np.delete(state.beta_active, prop.pos)


def _propose(ws, state, j, stats, cols, counters):
    """Return ``(proposal, delta)`` for flipping ``z_j``; ``delta`` is
    ``L(A with j) - L(A without j)``.  ``(None, nan)`` when unstable."""
    if state.z[j]:
        prop = ws.propose_drop(j)
        if not prop.ok:
            ws.refresh()
            if counters is not None:
                counters.drop_refreshes += 1
            prop = ws.propose_drop(j)
            if not prop.ok:
                return None, float("nan")
        return prop, -prop.delta_loglik
    prop = ws.propose_add(j, cols.cross(j), stats.t[j], stats.s[j], state.tau2[j])
    if not prop.ok:
        return None, float("nan")
    return prop, prop.delta_loglik


def coordinate_log_odds(ws, state, j, stats, cols, counters=None):
    """Full-conditional log-odds of ``z_j = 1`` together with the proposal."""
    prop, delta = _propose(ws, state, j, stats, cols, counters)
    if prop is None:
        return None, float("nan")
    return prop, delta + log_prior_odds(state.pi)


def gibbs_update_coordinate(ws: ActiveSetWorkspace, state: ModelState, j: int, stats: MarginalStats,
                            cols, rng: np.random.Generator, counters: Counters | None = None,
                            lpo: float | None = None) -> bool:
    """Exact Gibbs draw of ``z_j`` from its collapsed full conditional.

    Returns True when ``z_j`` changed.  Coordinates whose Schur complement
    fails the safeguard are left unchanged and counted as skipped.
    """
    if lpo is None:
        lpo = log_prior_odds(state.pi)
    prop, delta = _propose(ws, state, j, stats, cols, counters)
    if counters is not None:
        counters.coordinate_updates += 1
    if prop is None:
        if counters is not None:
            counters.skipped_unstable += 1
        return False
    include = rng.random() < _logistic(delta + lpo)
    currently = bool(state.z[j])
    if include == currently:
        return False
    if include:
        _do_add(ws, state, cols, prop)
        if counters is not None:
            counters.adds += 1
    else:
        _do_drop(ws, state, cols, prop)
        if counters is not None:
            counters.drops += 1
    return True


def mh_flip_coordinate(ws: ActiveSetWorkspace, state: ModelState, j: int, stats: MarginalStats,
                       cols, rng: np.random.Generator, counters: Counters | None = None,
                       lpo: float | None = None) -> bool:
    """Metropolis-Hastings flip of ``z_j``; the flip proposal is its own reverse."""
    if lpo is None:
        lpo = log_prior_odds(state.pi)
    prop, delta = _propose(ws, state, j, stats, cols, counters)
    if counters is not None:
        counters.coordinate_updates += 1
    if prop is None:
        if counters is not None:
            counters.skipped_unstable += 1
        return False
    adding = not state.z[j]
    log_r = (delta + lpo) if adding else -(delta + lpo)
    if counters is not None:
        counters.mh_proposed += 1
    if not rng.random() < math.exp(min(log_r, 0.0)):
        return False
    if counters is not None:
        counters.mh_accepted += 1
    if adding:
        _do_add(ws, state, cols, prop)
        if counters is not None:
            counters.adds += 1
    else:
        _do_drop(ws, state, cols, prop)
        if counters is not None:
            counters.drops += 1
    return True


# -- conditional updates ---------------------------------------------------

def update_beta_active(ws: ActiveSetWorkspace, state: ModelState, rng: np.random.Generator,
                       cols=None, counters: Counters | None = None) -> None:
    if not state.active:
        state.beta_active = np.zeros(0)
        return
    tau2_A = state.tau2[state.active]

    def draw():
        P = ws.G0_AA / state.sigma2 + np.diag(state.kappa2 / tau2_A)
        return rd.sample_mvn_from_precision(P, ws.h0_A / state.sigma2, rng)

    try:
        state.beta_active = draw()
    except np.linalg.LinAlgError:
        if cols is None:
            raise SamplerError(f"beta precision not positive definite for active set {state.active}")
        if counters is not None:
            counters.beta_retries += 1
        ws.G0_AA = cols.gram()
        try:
            state.beta_active = draw()
        except np.linalg.LinAlgError as exc:
            raise SamplerError(
                f"beta precision not positive definite for active set {state.active}"
            ) from exc


def update_tau2(state: ModelState, hyper: Hyperparameters, rng: np.random.Generator) -> None:
    """Prior draws for inactive coordinates, reciprocal inverse-Gaussian for active ones."""
    lam2 = hyper.lambda1 ** 2
    tau2 = rng.exponential(2.0 / lam2, size=state.p)
    if state.active:
        beta2 = np.maximum(state.beta_active ** 2, rd.BETA2_FLOOR)
        mu = hyper.lambda1 / (np.sqrt(beta2) * math.sqrt(state.kappa2))
        omega = rd.sample_inverse_gaussian(mu, lam2, rng, size=mu.shape)
        tau2[state.active] = 1.0 / omega
    state.tau2 = tau2


def update_kappa2(state: ModelState, hyper: Hyperparameters, rng: np.random.Generator) -> None:
    shape = hyper.a_kappa + 0.5 * len(state.active)
    rate = hyper.b_kappa
    if state.active:
        rate += 0.5 * float(np.sum(state.beta_active ** 2 / state.tau2[state.active]))
    state.kappa2 = float(rng.gamma(shape, 1.0 / rate))


def residual_sse(ws: ActiveSetWorkspace, beta_A: np.ndarray, c_y: float) -> float:
    if beta_A.size == 0:
        return c_y
    return c_y - 2.0 * float(beta_A @ ws.h0_A) + float(beta_A @ ws.G0_AA @ beta_A)


def update_sigma2(state: ModelState, ws: ActiveSetWorkspace, n: int, c_y: float,
                  hyper: Hyperparameters, rng: np.random.Generator,
                  counters: Counters | None = None) -> float:
    """Inverse-gamma draw from the Gram-based residual sum of squares; returns the SSE."""
    sse = residual_sse(ws, state.beta_active, c_y)
    if sse < 0.0:
        sse = 0.0
        if counters is not None:
            counters.sse_clamped += 1
    shape = hyper.a_sigma + 0.5 * n
    scale = hyper.b_sigma + 0.5 * sse
    state.sigma2 = float(scale / rng.gamma(shape, 1.0))
    return sse


def update_pi(state: ModelState, rng: np.random.Generator) -> None:
    k = len(state.active)
    pi = float(rng.beta(state.a_pi + k, state.b_pi + (state.p - k)))
    state.pi = min(max(pi, PI_EDGE), 1.0 - PI_EDGE)


def _log_gamma_pdf(x: float, shape: float, rate: float) -> float:
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1.0) * math.log(x) - rate * x


def log_ab_target(a: float, b: float, pi: float, hyper: Hyperparameters) -> float:
    """``log p(pi | a, b) + log p(a) + log p(b)``."""
    log_beta = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + (a - 1.0) * math.log(pi) + (b - 1.0) * math.log1p(-pi))
    return (log_beta + _log_gamma_pdf(a, hyper.alpha_a, hyper.beta_a)
            + _log_gamma_pdf(b, hyper.alpha_b, hyper.beta_b))


def ab_log_ratio(a_new: float, b_new: float, a: float, b: float, pi: float,
                 hyper: Hyperparameters) -> float:
    """Log acceptance ratio of the log-scale random walk.

    The walk is symmetric in ``(log a, log b)``, so the target expressed on
    that scale carries the Jacobian ``a * b``.
    """
    new = log_ab_target(a_new, b_new, pi, hyper) + math.log(a_new) + math.log(b_new)
    old = log_ab_target(a, b, pi, hyper) + math.log(a) + math.log(b)
    return new - old


def update_ab_pi(state: ModelState, hyper: Hyperparameters, rng: np.random.Generator,
                 counters: Counters | None = None) -> bool:
    ea, eb = rng.normal(0.0, hyper.sigma_prop, size=2)
    a_new = state.a_pi * math.exp(ea)
    b_new = state.b_pi * math.exp(eb)
    u = rng.random()
    if counters is not None:
        counters.ab_proposed += 1
    if not (a_new > 0 and b_new > 0 and math.isfinite(a_new) and math.isfinite(b_new)):
        return False
    log_r = ab_log_ratio(a_new, b_new, state.a_pi, state.b_pi, state.pi, hyper)
    if u < math.exp(min(log_r, 0.0)):
        state.a_pi, state.b_pi = a_new, b_new
        if counters is not None:
            counters.ab_accepted += 1
        return True
    return False


# -- driver ----------------------------------------------------------------

@dataclass
class ChainOutput:
    summary: PipSummary
    config: ChainConfig
    chain_id: int
    counters: Counters
    sigma2_mean: float
    trace: dict
    state: ModelState
    weights: ScanWeights | None
    timing: dict = field(default_factory=dict)
    metrics: dict | None = None


def z_scan(ws, state, coords, stats, cols, rng, scan_mode, counters=None) -> None:
    lpo = log_prior_odds(state.pi)
    update = gibbs_update_coordinate if scan_mode == ScanMode.RANDOM_SCAN else mh_flip_coordinate
    for j in coords:
        update(ws, state, int(j), stats, cols, rng, counters, lpo)


def prepare(config: ChainConfig, data: Dataset) -> tuple[Dataset, MarginalStats]:
    validate(config, data)
    if config.standardize:
        data = standardize(data)
    return data, precompute_marginals(data)


def run_chain(config: ChainConfig, data: Dataset, truth=None, chain_id: int = 0,
              log_every: int = 0) -> ChainOutput:
    """Run one chain and return PIP/coefficient summaries.

    Deterministic given ``(config.seed, chain_id)``.  ``truth`` (0-based
    indices) only adds selection metrics to the output.
    """
    t0 = time.perf_counter()
    data, stats = prepare(config, data)
    n, p = data.X.shape
    hyper = config.hyper
    rng = rd.make_rng(config.seed, chain_id)

    if config.scan_mode == ScanMode.FULL_SWEEP:
        cols = build_full_gram(data, cap=config.gram_cap)
        weights = None
    else:
        cols = ActiveColumns(data.X)
        weights = compute_weights(stats.rho, config.epsilon)

    state = initialize_state(config, p, rng)
    cols.reset(state.active)
    ws = build_workspace(state.active, cols.gram(), stats.s[state.active],
                         state.sigma2, state.kappa2, state.tau2[state.active])
    t_setup = time.perf_counter() - t0

    counters = Counters()
    counts = np.zeros(p, dtype=np.int64)
    visits = np.zeros(p, dtype=np.int64)
    beta_sum = np.zeros(p)
    beta_sq = np.zeros(p)
    tr_iter, tr_size, tr_sigma2, tr_pi = [], [], [], []
    sigma2_sum = 0.0
    n_kept = 0
    t_scan = t_rest = 0.0
    all_coords = np.arange(p)

    for it in range(config.n_iter):
        ta = time.perf_counter()
        try:
            ws.refresh(state.sigma2, state.kappa2, state.tau2[state.active])
        except WorkspaceError as exc:
            raise SamplerError(f"iteration {it}: {exc}") from exc
        if weights is not None:
            coords = sample_coordinates(weights, config.m, rng)
            visits[coords] += 1
        else:
            coords = all_coords
            visits += 1
        z_scan(ws, state, coords, stats, cols, rng, config.scan_mode, counters)
        tb = time.perf_counter()

        try:
            update_beta_active(ws, state, rng, cols, counters)
        except SamplerError as exc:
            raise SamplerError(f"iteration {it}: {exc}") from exc
        update_tau2(state, hyper, rng)
        update_sigma2(state, ws, n, stats.c_y, hyper, rng, counters)
        update_kappa2(state, hyper, rng)
        update_pi(state, rng)
        update_ab_pi(state, hyper, rng, counters)

        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            act = state.active
            counts[act] += 1
            beta_sum[act] += state.beta_active
            beta_sq[act] += state.beta_active ** 2
            sigma2_sum += state.sigma2
            n_kept += 1
            tr_iter.append(it)
            tr_size.append(len(act))
            tr_sigma2.append(state.sigma2)
            tr_pi.append(state.pi)
        t_scan += tb - ta
        t_rest += time.perf_counter() - tb
        if log_every and (it + 1) % log_every == 0:
            log.info("chain %d iter %d/%d |A|=%d sigma2=%.4g pi=%.3g",
                     chain_id, it + 1, config.n_iter, len(state.active), state.sigma2, state.pi)

    summary = summarize(counts, n_kept, visits, beta_sum, beta_sq)
    metrics = None
    if truth is not None:
        metrics = {
            "khat": selection_metrics(summary.selected, truth).__dict__,
            "median": selection_metrics(summary.median, truth).__dict__,
        }
    trace = {
        "iteration": np.asarray(tr_iter, dtype=np.int64),
        "size": np.asarray(tr_size, dtype=np.int64),
        "sigma2": np.asarray(tr_sigma2),
        "pi": np.asarray(tr_pi),
    }
    timing = {"setup": t_setup, "z_scan": t_scan, "conditionals": t_rest,
              "total": time.perf_counter() - t0}
    return ChainOutput(summary=summary, config=config, chain_id=chain_id, counters=counters,
                       sigma2_mean=sigma2_sum / n_kept, trace=trace, state=state,
                       weights=weights, timing=timing, metrics=metrics)
