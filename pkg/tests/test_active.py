import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srscan.active import (SCHUR_MIN, WorkspaceError, build_workspace, direct_loglik,
                           mform_loglik)


def ws_from(X, y, active, sigma2=1.0, kappa2=1.0, tau2=None):
    active = list(active)
    XA = X[:, active]
    if tau2 is None:
        tau2 = np.ones(len(active))
    return build_workspace(active, XA.T @ XA, XA.T @ y, sigma2, kappa2, tau2)


def add(ws, X, y, j, tau2_j):
    prop = ws.propose_add(j, X[:, ws.active].T @ X[:, j], float(X[:, j] @ X[:, j]),
                          float(X[:, j] @ y), tau2_j)
    return prop


# -- build_workspace ---------------------------------------------------------

def test_empty_workspace_is_vacuous():
    ws = build_workspace([], np.zeros((0, 0)), np.zeros(0), 1.0, 1.0, np.zeros(0))
    assert ws.logdetM == 0.0 and ws.qA == 0.0
    assert ws.M_inv.shape == (0, 0)


def test_single_member_hand_values():
    ws = build_workspace([0], [[1.0]], [2.0], 1.0, 1.0, [1.0])
    assert ws.logdetM == pytest.approx(math.log(2.0), abs=1e-15)
    assert ws.qA == pytest.approx(2.0, abs=1e-15)
    assert ws.M_inv[0, 0] == pytest.approx(0.5)


def test_logdet_matches_dense_determinant(rng):
    X = rng.standard_normal((40, 6))
    y = rng.standard_normal(40)
    tau2 = rng.uniform(0.2, 3.0, 6)
    ws = ws_from(X, y, range(6), sigma2=0.7, kappa2=1.3, tau2=tau2)
    M = np.diag(1.3 / tau2) + X.T @ X / 0.7
    assert ws.logdetM == pytest.approx(math.log(np.linalg.det(M)), abs=1e-10)
    h = X.T @ y / 0.7
    assert ws.qA == pytest.approx(h @ np.linalg.solve(M, h), rel=1e-12)


def test_non_pd_build_names_the_active_set():
    G = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(WorkspaceError, match=r"\[3, 7\]"):
        build_workspace([3, 7], G * 10, [0.0, 0.0], 1.0, 1e-3, [1.0, 1.0])


# -- add ---------------------------------------------------------------------

def test_add_to_empty_set_hand_values():
    ws = build_workspace([], np.zeros((0, 0)), np.zeros(0), 1.0, 1.0, np.zeros(0))
    prop = ws.propose_add(0, np.zeros(0), 1.0, 2.0, 1.0)
    assert prop.s == pytest.approx(2.0)
    assert prop.u == pytest.approx(2.0)
    # -1/2 (log 2 - 2) = 0.65342640...
    assert prop.delta_loglik == pytest.approx(0.6534264097200273, abs=1e-12)
    ws.apply_add(prop)
    assert ws.logdetM == pytest.approx(math.log(2.0))
    assert ws.qA == pytest.approx(2.0)


def test_collinear_column_is_rejected(rng):
    X = rng.standard_normal((20, 3))
    X[:, 2] = X[:, 0]
    y = rng.standard_normal(20)
    # weak prior precision so the Schur complement is dominated by the exact collinearity
    ws = ws_from(X, y, [0], kappa2=1e-14)
    prop = ws.propose_add(2, X[:, [0]].T @ X[:, 2], float(X[:, 2] @ X[:, 2]), float(X[:, 2] @ y), 1.0)
    assert prop.s <= SCHUR_MIN
    assert not prop.ok
    with pytest.raises(WorkspaceError):
        ws.apply_add(prop)


@pytest.mark.parametrize("seed", range(5))
def test_add_delta_matches_direct_oracle(seed):
    r = np.random.default_rng(seed)
    n, p = 30, 9
    X = r.standard_normal((n, p))
    y = X[:, :2] @ np.array([1.0, -0.5]) + r.standard_normal(n)
    tau2 = r.uniform(0.3, 2.0, p)
    s2, k2 = 0.9, 1.4
    A = [4, 0, 7, 2, 5]
    ws = ws_from(X, y, A, s2, k2, tau2[A])
    for j in (1, 3, 6, 8):
        prop = ws.propose_add(j, X[:, A].T @ X[:, j], float(X[:, j] @ X[:, j]), float(X[:, j] @ y), tau2[j])
        ref = (direct_loglik(X, y, A + [j], s2, k2, tau2[A + [j]])
               - direct_loglik(X, y, A, s2, k2, tau2[A]))
        assert prop.delta_loglik == pytest.approx(ref, abs=1e-9)


def test_add_then_drop_schur_consistency(rng):
    X = rng.standard_normal((25, 6))
    y = rng.standard_normal(25)
    ws = ws_from(X, y, [0, 1, 2], tau2=np.array([0.5, 1.0, 2.0]))
    prop = add(ws, X, y, 4, 0.8)
    ws.apply_add(prop)
    drop = ws.propose_drop(4)
    assert drop.s == pytest.approx(1.0 / ws.M_inv[-1, -1], rel=1e-14)
    assert drop.s == pytest.approx(prop.s, rel=1e-10)
    assert drop.delta_loglik == pytest.approx(-prop.delta_loglik, abs=1e-10)


def test_inverse_stays_accurate_after_many_adds(rng):
    X = rng.standard_normal((120, 100))
    y = rng.standard_normal(120)
    ws = ws_from(X, y, [])
    order = rng.permutation(100)[:50]
    for j in order:
        prop = add(ws, X, y, int(j), float(rng.uniform(0.5, 2.0)))
        ws.apply_add(prop)
    err = np.abs(ws.M_inv @ ws.precision() - np.eye(50)).max()
    assert err <= 1e-8


# -- drop --------------------------------------------------------------------

def test_drop_only_member_returns_to_empty(rng):
    X = rng.standard_normal((15, 3))
    y = rng.standard_normal(15)
    ws = ws_from(X, y, [1], tau2=[0.7])
    ws.apply_drop(1)
    assert ws.active == []
    assert abs(ws.logdetM) <= 1e-10 and abs(ws.qA) <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_drop_delta_matches_direct_oracle(seed):
    r = np.random.default_rng(100 + seed)
    n, p = 35, 10
    X = r.standard_normal((n, p))
    y = X[:, :3] @ np.array([1.0, 1.0, -1.0]) + r.standard_normal(n)
    tau2 = r.uniform(0.3, 2.0, p)
    s2, k2 = 1.2, 0.8
    A = [9, 1, 4, 0, 6, 2, 7]
    ws = ws_from(X, y, A, s2, k2, tau2[A])
    for j in A:
        rest = [a for a in A if a != j]
        prop = ws.propose_drop(j)
        ref = (direct_loglik(X, y, rest, s2, k2, tau2[rest])
               - direct_loglik(X, y, A, s2, k2, tau2[A]))
        assert prop.delta_loglik == pytest.approx(ref, abs=1e-9)


def test_drop_from_two_matches_fresh_build(rng):
    X = rng.standard_normal((20, 4))
    y = rng.standard_normal(20)
    ws = ws_from(X, y, [3, 1], sigma2=0.5, kappa2=2.0, tau2=[0.4, 1.5])
    ws.apply_drop(3)
    fresh = ws_from(X, y, [1], sigma2=0.5, kappa2=2.0, tau2=[1.5])
    assert ws.active == [1]
    np.testing.assert_allclose(ws.M_inv, fresh.M_inv, rtol=1e-12)
    assert ws.logdetM == pytest.approx(fresh.logdetM, abs=1e-12)
    assert ws.qA == pytest.approx(fresh.qA, abs=1e-12)


def test_long_add_drop_sequence_matches_fresh_build(rng):
    n, p = 60, 80
    X = rng.standard_normal((n, p))
    y = X[:, :4].sum(axis=1) + rng.standard_normal(n)
    tau2 = rng.uniform(0.5, 2.0, p)
    ws = ws_from(X, y, [], tau2=np.zeros(0))
    moves = 0
    while moves < 2000:
        if ws.size < 3 or (ws.size < 25 and rng.random() < 0.5):
            j = int(rng.choice(np.setdiff1d(np.arange(p), ws.active)))
            prop = add(ws, X, y, j, tau2[j])
            ws.apply_add(prop)
        else:
            ws.apply_drop(int(rng.choice(ws.active)))
        moves += 1
    fresh = ws_from(X, y, ws.active, tau2=tau2[ws.active])
    assert abs(ws.logdetM - fresh.logdetM) <= 1e-8 * abs(fresh.logdetM)
    assert abs(ws.qA - fresh.qA) <= 1e-8 * abs(fresh.qA)


# -- refresh and dual form -----------------------------------------------------

def test_refresh_right_after_build_is_stable(rng):
    X = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    ws = ws_from(X, y, range(5))
    before = (ws.M_inv.copy(), ws.logdetM, ws.qA)
    ws.refresh()
    np.testing.assert_allclose(ws.M_inv, before[0], atol=1e-12)
    assert abs(ws.logdetM - before[1]) <= 1e-12 and abs(ws.qA - before[2]) <= 1e-12


def test_refresh_with_new_sigma2_matches_rebuild(rng):
    X = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    tau2 = rng.uniform(0.5, 2, 5)
    ws = ws_from(X, y, range(5), sigma2=1.0, tau2=tau2)
    ws.refresh(sigma2=3.0)
    ref = ws_from(X, y, range(5), sigma2=3.0, tau2=tau2)
    np.testing.assert_allclose(ws.M_inv, ref.M_inv, rtol=1e-12)
    assert ws.logdetM == pytest.approx(ref.logdetM, abs=1e-12)


def test_refresh_after_many_updates_restores_identity(rng):
    X = rng.standard_normal((80, 40))
    y = rng.standard_normal(80)
    ws = ws_from(X, y, [])
    for _ in range(10_000):
        if ws.size < 2 or (ws.size < 15 and rng.random() < 0.5):
            j = int(rng.choice(np.setdiff1d(np.arange(40), ws.active)))
            ws.apply_add(add(ws, X, y, j, 1.0))
        else:
            ws.apply_drop(int(rng.choice(ws.active)))
    ws.refresh()
    assert np.abs(ws.M_inv @ ws.precision() - np.eye(ws.size)).max() <= 1e-10


def test_empty_set_loglik_closed_form(rng):
    X = rng.standard_normal((12, 3))
    y = rng.standard_normal(12)
    s2 = 1.7
    ref = -0.5 * (12 * math.log(s2) + y @ y / s2)
    assert direct_loglik(X, y, [], s2, 1.0, np.zeros(0)) == pytest.approx(ref, abs=1e-12)
    assert mform_loglik(X, y, [], s2, 1.0, np.zeros(0)) == pytest.approx(ref, abs=1e-12)


def test_sigma2_scaling_matches_recomputation(rng):
    X = rng.standard_normal((30, 4))
    y = rng.standard_normal(30)
    tau2 = np.array([0.5, 1.0, 1.5, 2.0])
    for s2 in (0.25, 1.0, 4.0):
        XA = X
        S = s2 * np.eye(30) + XA @ np.diag(tau2 / 1.1) @ XA.T
        sign, logdet = np.linalg.slogdet(S)
        ref = -0.5 * (logdet + y @ np.linalg.solve(S, y))
        assert mform_loglik(X, y, range(4), s2, 1.1, tau2) == pytest.approx(ref, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(5, 50), k=st.integers(0, 10))
def test_dual_forms_agree(seed, n, k):
    r = np.random.default_rng(seed)
    p = 12
    X = r.standard_normal((n, p)) * r.uniform(0.2, 3.0)
    y = r.standard_normal(n) * r.uniform(0.5, 5.0)
    A = list(r.choice(p, size=k, replace=False))
    tau2 = r.uniform(0.05, 5.0, k)
    s2, k2 = r.uniform(0.1, 5.0), r.uniform(0.1, 5.0)
    assert mform_loglik(X, y, A, s2, k2, tau2) == pytest.approx(
        direct_loglik(X, y, A, s2, k2, tau2), abs=1e-9)
