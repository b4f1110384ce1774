"""Block-correlated Gaussian benchmark designs with a sparse +-1 signal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .distributions import make_rng

JITTER_START = 1e-8
JITTER_MAX = 1e-3


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimSpec:
    n: int = 500
    p: int = 10_000
    rho_block: float = 0.3
    block_size: int = 20
    k_true: int = 10
    sigma2_true: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if not 0.0 <= self.rho_block < 1.0:
            raise ValueError("rho_block must lie in [0, 1)")
        if not 1 <= self.k_true <= self.block_size <= self.p:
            raise ValueError("need 1 <= k_true <= block_size <= p")
        if self.sigma2_true < 0:
            raise ValueError("sigma2_true must be non-negative")


@dataclass
class SimInstance:
    X: np.ndarray
    y: np.ndarray
    beta_true: np.ndarray
    truth: np.ndarray
    jitter_used: float
    snr: float
    pve: float
    spec: SimSpec


def block_cov(size: int, rho: float) -> np.ndarray:
    return (1.0 - rho) * np.eye(size) + rho * np.ones((size, size))


def jittered_cholesky(S: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``S + jitter I`` with exponential backoff.

    jitter goes 0, 1e-8, 1e-7, ... up to 1e-3.
    """
    jitter = 0.0
    eye = np.eye(S.shape[0])
    while True:
        try:
            return linalg.cholesky(S + jitter * eye, lower=True), jitter
        except linalg.LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise SimulationError("Cholesky failed even at the maximum jitter 1e-3") from None


def gen_design(spec: SimSpec, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Rows ~ N(0, Sigma + jitter I) with Sigma block-diagonal.

    Each block is factorized on its own; the result equals a p x p
    factorization because Sigma has no cross-block entries.
    """
    n, p, bs = spec.n, spec.p, spec.block_size
    Z = rng.standard_normal((n, p))
    X = np.empty((n, p))
    n_full, rem = divmod(p, bs)
    L, jitter = jittered_cholesky(block_cov(bs, spec.rho_block))
    if n_full:
        Zb = Z[:, : n_full * bs].reshape(n, n_full, bs)
        X[:, : n_full * bs] = np.einsum("nbk,jk->nbj", Zb, L).reshape(n, n_full * bs)
    if rem:
        Lr, jr = jittered_cholesky(block_cov(rem, spec.rho_block))
        X[:, n_full * bs:] = Z[:, n_full * bs:] @ Lr.T
        jitter = max(jitter, jr)
    return X, jitter


def true_beta(spec: SimSpec) -> np.ndarray:
    """+1 on the first k/2 coordinates, -1 on the next k/2, zero elsewhere."""
    k = spec.k_true
    if k % 2:
        raise ValueError("k_true must be even for the balanced +-1 pattern")
    beta = np.zeros(spec.p)
    beta[: k // 2] = 1.0
    beta[k // 2: k] = -1.0
    return beta


def gen_response(X: np.ndarray, beta: np.ndarray, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(X.shape[0])
    return X @ beta + np.sqrt(sigma2) * noise


def signal_variance(spec: SimSpec, beta: np.ndarray | None = None) -> float:
    """``beta' Sigma beta`` evaluated block by block."""
    if beta is None:
        beta = true_beta(spec)
    rho, bs = spec.rho_block, spec.block_size
    total = 0.0
    for start in range(0, spec.p, bs):
        b = beta[start:start + bs]
        if np.any(b):
            total += (1.0 - rho) * float(b @ b) + rho * float(b.sum()) ** 2
    return total


def snr_pve(spec: SimSpec) -> tuple[float, float]:
    v = signal_variance(spec)
    s2 = spec.sigma2_true
    snr = v / s2 if s2 > 0 else np.inf
    return snr, v / (v + s2)


def simulate(spec: SimSpec, rng: np.random.Generator | None = None) -> SimInstance:
    if rng is None:
        rng = make_rng(spec.seed)
    X, jitter = gen_design(spec, rng)
    beta = true_beta(spec)
    y = gen_response(X, beta, spec.sigma2_true, rng)
    signal = X @ beta
    var_signal = float(np.var(signal, ddof=1))
    noise_var = float(np.var(y - signal, ddof=1))
    snr = var_signal / noise_var if noise_var > 0 else np.inf
    pve = var_signal / (var_signal + noise_var)
    return SimInstance(X=X, y=y, beta_true=beta, truth=np.flatnonzero(beta), jitter_used=jitter,
                       snr=snr, pve=pve, spec=spec)
