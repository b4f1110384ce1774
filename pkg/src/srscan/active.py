"""Active-set precision workspace with rank-one add/drop updates.

The collapsed log-likelihood of an active set A is

    L(A) = -1/2 [ n log s2 + sum_A log(tau2_j/kappa2) + log|M| + c_y/s2 - q(A) ]

with ``M = diag(kappa2/tau2_A) + G0_AA/s2`` and ``q(A) = h_A' M^{-1} h_A``,
``h_A = h0_A/s2``.  Only the |A| x |A| matrix ``M^{-1}`` and the scalars
``log|M|`` and ``q(A)`` are carried between moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

SCHUR_MIN = 1e-12


class WorkspaceError(np.linalg.LinAlgError):
    pass


@dataclass
class AddProposal:
    j: int
    s: float
    u: float
    g: np.ndarray       # G_{A,j} / s2
    Minv_g: np.ndarray
    g0: np.ndarray      # unscaled G0_{A,j}
    t_j: float
    h0_j: float
    tau2_j: float
    delta_loglik: float

    @property
    def ok(self) -> bool:
        return self.s > SCHUR_MIN


@dataclass
class DropProposal:
    j: int
    pos: int
    s: float
    delta_q: float
    delta_loglik: float

    @property
    def ok(self) -> bool:
        return math.isfinite(self.s) and self.s > 0


@dataclass
class ActiveSetWorkspace:
    active: list
    G0_AA: np.ndarray
    h0_A: np.ndarray
    tau2_A: np.ndarray
    sigma2: float
    kappa2: float
    M_inv: np.ndarray
    logdetM: float
    qA: float

    @property
    def size(self) -> int:
        return len(self.active)

    @property
    def h_A(self) -> np.ndarray:
        return self.h0_A / self.sigma2

    def precision(self) -> np.ndarray:
        """Assemble ``M`` explicitly (tests and refresh only)."""
        return np.diag(self.kappa2 / self.tau2_A) + self.G0_AA / self.sigma2

    def loglik(self, n: int, c_y: float) -> float:
        """Collapsed log-likelihood in the M-form, additive constant omitted."""
        return -0.5 * (
            n * math.log(self.sigma2)
            + float(np.sum(np.log(self.tau2_A / self.kappa2)))
            + self.logdetM
            + c_y / self.sigma2
            - self.qA
        )

    def copy(self) -> "ActiveSetWorkspace":
        return ActiveSetWorkspace(
            active=list(self.active), G0_AA=self.G0_AA.copy(), h0_A=self.h0_A.copy(),
            tau2_A=self.tau2_A.copy(), sigma2=self.sigma2, kappa2=self.kappa2,
            M_inv=self.M_inv.copy(), logdetM=self.logdetM, qA=self.qA,
        )

    # -- add ---------------------------------------------------------------

    def propose_add(self, j: int, g_col, t_j: float, h0_j: float, tau2_j: float) -> AddProposal:
        s2, k2 = self.sigma2, self.kappa2
        g0 = np.asarray(g_col, dtype=np.float64)
        g = g0 / s2
        if self.active:
            Mg = self.M_inv @ g
            s = k2 / tau2_j + t_j / s2 - float(g @ Mg)
            u = h0_j / s2 - float(Mg @ self.h0_A) / s2
        else:
            Mg = g
            s = k2 / tau2_j + t_j / s2
            u = h0_j / s2
        if s > SCHUR_MIN:
            delta = -0.5 * (math.log(tau2_j / k2) + math.log(s) - u * u / s)
        else:
            delta = float("nan")
        return AddProposal(j, s, u, g, Mg, g0, t_j, h0_j, tau2_j, delta)

    def apply_add(self, prop: AddProposal) -> None:
        if not prop.ok:
            raise WorkspaceError(f"Schur complement {prop.s:.3e} below safeguard for column {prop.j}")
        k = self.size
        inv_s = 1.0 / prop.s
        t = prop.Minv_g
        Minv = np.empty((k + 1, k + 1))
        Minv[:k, :k] = self.M_inv + inv_s * np.outer(t, t)
        Minv[:k, k] = Minv[k, :k] = -inv_s * t
        Minv[k, k] = inv_s
        G0 = np.empty((k + 1, k + 1))
        G0[:k, :k] = self.G0_AA
        G0[:k, k] = G0[k, :k] = prop.g0
        G0[k, k] = prop.t_j
        self.M_inv = Minv
        self.G0_AA = G0
        self.h0_A = np.append(self.h0_A, prop.h0_j)
        self.tau2_A = np.append(self.tau2_A, prop.tau2_j)
        self.active.append(prop.j)
        self.logdetM += math.log(prop.s)
        self.qA += prop.u * prop.u / prop.s

    # -- drop --------------------------------------------------------------

    def propose_drop(self, j: int) -> DropProposal:
        pos = self.active.index(j)
        Minv = self.M_inv
        h = self.h0_A / self.sigma2
        g = Minv[pos, pos]
        if not g > 0:
            return DropProposal(j, pos, float("nan"), float("nan"), float("nan"))
        f = np.delete(Minv[:, pos], pos)
        h_rest = np.delete(h, pos)
        h_m = h[pos]
        fh = float(f @ h_rest)
        s = 1.0 / g
        delta_q = 2.0 * h_m * fh + g * h_m * h_m + fh * fh / g
        d_j = self.tau2_A[pos] / self.kappa2
        delta = -0.5 * (-math.log(d_j) - math.log(s) + delta_q)
        return DropProposal(j, pos, s, delta_q, delta)

    def apply_drop(self, prop: DropProposal | int) -> None:
        if not isinstance(prop, DropProposal):
            prop = self.propose_drop(int(prop))
        if not prop.ok:
            raise WorkspaceError(f"non-positive pivot dropping column {prop.j}; refresh required")
        pos = prop.pos
        Minv = self.M_inv
        g = Minv[pos, pos]
        f = np.delete(Minv[:, pos], pos)
        E = np.delete(np.delete(Minv, pos, axis=0), pos, axis=1)
        self.M_inv = E - np.outer(f, f) / g
        self.G0_AA = np.delete(np.delete(self.G0_AA, pos, axis=0), pos, axis=1)
        self.h0_A = np.delete(self.h0_A, pos)
        self.tau2_A = np.delete(self.tau2_A, pos)
        del self.active[pos]
        self.logdetM -= math.log(prop.s)
        self.qA -= prop.delta_q
        if not self.active:
            # vacuous M: remove accumulated rounding
            self.logdetM = 0.0
            self.qA = 0.0

    # -- rebuild -----------------------------------------------------------

    def refresh(self, sigma2: float | None = None, kappa2: float | None = None, tau2_A=None) -> None:
        """Refactorize ``M`` from the stored Gram block, optionally at new scales."""
        if sigma2 is not None:
            self.sigma2 = float(sigma2)
        if kappa2 is not None:
            self.kappa2 = float(kappa2)
        if tau2_A is not None:
            self.tau2_A = np.array(tau2_A, dtype=np.float64)
        k = self.size
        if k == 0:
            self.M_inv = np.zeros((0, 0))
            self.logdetM = 0.0
            self.qA = 0.0
            return
        M = self.precision()
        try:
            c = linalg.cho_factor(M, lower=False, check_finite=False)
        except linalg.LinAlgError as exc:
            raise WorkspaceError(f"M is not positive definite for active set {self.active}") from exc
        Minv = linalg.cho_solve(c, np.eye(k), check_finite=False)
        self.M_inv = 0.5 * (Minv + Minv.T)
        self.logdetM = 2.0 * float(np.sum(np.log(np.diag(c[0]))))
        h = self.h0_A / self.sigma2
        w = linalg.solve_triangular(c[0], h, trans="T", lower=False, check_finite=False)
        self.qA = float(w @ w)


def build_workspace(active, G0_AA, h0_A, sigma2: float, kappa2: float, tau2_A) -> ActiveSetWorkspace:
    k = len(active)
    G0_AA = np.array(G0_AA, dtype=np.float64).reshape(k, k)
    ws = ActiveSetWorkspace(
        active=[int(a) for a in active],
        G0_AA=0.5 * (G0_AA + G0_AA.T),
        h0_A=np.array(h0_A, dtype=np.float64).reshape(k),
        tau2_A=np.array(tau2_A, dtype=np.float64).reshape(k),
        sigma2=float(sigma2), kappa2=float(kappa2),
        M_inv=np.zeros((0, 0)), logdetM=0.0, qA=0.0,
    )
    ws.refresh()
    return ws


def refresh(ws: ActiveSetWorkspace, sigma2=None, kappa2=None, tau2_A=None) -> ActiveSetWorkspace:
    ws.refresh(sigma2, kappa2, tau2_A)
    return ws


def direct_loglik(X, y, active, sigma2: float, kappa2: float, tau2_A) -> float:
    """Collapsed log-likelihood from the n x n covariance ``S`` (test oracle).

    ``S = s2 I + X_A D_A X_A'`` with ``D_A = diag(tau2_A/kappa2)``; returns
    ``-1/2 (log|S| + y'S^{-1}y)`` without the ``2 pi`` constant.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    active = list(active)
    XA = X[:, active]
    d = np.asarray(tau2_A, dtype=np.float64) / kappa2
    S = sigma2 * np.eye(n) + (XA * d) @ XA.T
    c = linalg.cho_factor(S, lower=True)
    logdet = 2.0 * float(np.sum(np.log(np.diag(c[0]))))
    quad = float(y @ linalg.cho_solve(c, y))
    return -0.5 * (logdet + quad)


def mform_loglik(X, y, active, sigma2: float, kappa2: float, tau2_A) -> float:
    """Same quantity via the |A| x |A| route (fresh workspace)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    active = list(active)
    XA = X[:, active]
    ws = build_workspace(active, XA.T @ XA, XA.T @ y, sigma2, kappa2, tau2_A)
    return ws.loglik(X.shape[0], float(y @ y))
