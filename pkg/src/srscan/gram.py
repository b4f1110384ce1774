"""Length-p marginal statistics and active-set cross-products.

In random-scan mode the p x p Gram matrix is never formed: only
``s_j = x_j'y``, ``t_j = ||x_j||^2`` and ``c_y = y'y`` are stored, and the
cross-products between the active columns and a candidate column are
computed when needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset

DEFAULT_GRAM_CAP = 5000


class GramCapError(MemoryError):
    pass


@dataclass(frozen=True)
class MarginalStats:
    s: np.ndarray
    t: np.ndarray
    c_y: float
    rho: np.ndarray
    degenerate: np.ndarray

    @property
    def p(self) -> int:
        return self.s.shape[0]


def standardize(data: Dataset) -> Dataset:
    """Center and scale every column of X and y (sample sd, ddof=1).

    Zero-variance columns are centered but left unscaled.
    """
    X = data.X - data.X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    sd[sd == 0] = 1.0
    X /= sd
    y = data.y - data.y.mean()
    ysd = y.std(ddof=1)
    if ysd > 0:
        y = y / ysd
    return Dataset(X=X, y=y, names=data.names)


def precompute_marginals(data: Dataset) -> MarginalStats:
    X, y = data.X, data.y
    s = X.T @ y
    t = np.einsum("ij,ij->j", X, X)
    c_y = float(y @ y)
    scale = max(float(t.max(initial=0.0)), 1.0)
    degenerate = t <= 1e-12 * scale
    denom = np.sqrt(np.where(degenerate, 1.0, t) * c_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.abs(s) / denom
    rho[degenerate | ~np.isfinite(rho)] = 0.0
    # |cos| can exceed 1 by an ulp
    np.minimum(rho, 1.0, out=rho)
    return MarginalStats(s=s, t=t, c_y=c_y, rho=rho, degenerate=degenerate)


def cross_product_active(data: Dataset, active, j: int) -> np.ndarray:
    """Return ``X_A' x_j``."""
    p = data.p
    if not 0 <= j < p:
        raise IndexError(f"column {j} out of range for p={p}")
    active = np.asarray(active, dtype=np.intp)
    if active.size and (active.min() < 0 or active.max() >= p):
        raise IndexError("active index out of range")
    if active.size == 0:
        return np.zeros(0)
    return data.X[:, active].T @ data.X[:, j]


class ActiveColumns:
    """On-the-fly cross-products against a cached copy of the active columns.

    Rows of ``XA_T`` follow the insertion order of the active set, matching
    the workspace ordering.
    """

    mode = "onthefly"

    def __init__(self, X: np.ndarray, active=()):
        self.X = np.asfortranarray(X)
        self.reset(active)

    def reset(self, active) -> None:
        self.active = list(active)
        self.XA_T = np.ascontiguousarray(self.X[:, self.active].T)

    def cross(self, j: int) -> np.ndarray:
        return self.XA_T @ self.X[:, j]

    def add(self, j: int) -> None:
        self.active.append(j)
        self.XA_T = np.vstack([self.XA_T, self.X[:, j]])

    def drop(self, pos: int) -> None:
        del self.active[pos]
        self.XA_T = np.delete(self.XA_T, pos, axis=0)

    def gram(self) -> np.ndarray:
        return self.XA_T @ self.XA_T.T


class FullGram:
    """Dense ``G0 = X'X``; only used by the full-sweep baseline."""

    mode = "full"

    def __init__(self, G0: np.ndarray, active=()):
        self.G0 = G0
        self.reset(active)

    def reset(self, active) -> None:
        self.active = list(active)

    def cross(self, j: int) -> np.ndarray:
        return self.G0[self.active, j]

    def add(self, j: int) -> None:
        self.active.append(j)

    def drop(self, pos: int) -> None:
        del self.active[pos]

    def gram(self) -> np.ndarray:
        return self.G0[np.ix_(self.active, self.active)]


def build_full_gram(data: Dataset, cap: int = DEFAULT_GRAM_CAP) -> FullGram:
    p = data.p
    if p > cap:
        gb = p * p * 8 / 1e9
        raise GramCapError(
            f"refusing to form the {p}x{p} Gram matrix (~{gb:.1f} GB) above the cap p<={cap}; "
            "use the random-scan (on-the-fly) mode or raise the cap"
        )
    X = data.X
    G0 = X.T @ X
    G0 = 0.5 * (G0 + G0.T)
    return FullGram(G0)
