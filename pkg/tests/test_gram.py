import numpy as np
import pytest

from srscan.gram import (ActiveColumns, GramCapError, build_full_gram, cross_product_active,
                         precompute_marginals, standardize)
from srscan.model import Dataset


def test_perfect_correlation(rng):
    X = rng.standard_normal((10, 3))
    st = precompute_marginals(Dataset(X, X[:, 1].copy()))
    assert st.s[1] == pytest.approx(st.t[1]) and st.t[1] == pytest.approx(st.c_y)
    assert st.rho[1] == pytest.approx(1.0, abs=1e-15)
    assert st.rho.max() <= 1.0


def test_orthogonal_column():
    X = np.array([[1.0, 1.0], [1.0, -1.0]])
    st = precompute_marginals(Dataset(X, np.array([1.0, 1.0])))
    assert st.s[1] == 0.0 and st.rho[1] == 0.0


def test_matches_dense_recomputation(rng):
    X = rng.standard_normal((20, 5))
    y = rng.standard_normal(20)
    st = precompute_marginals(Dataset(X, y))
    for j in range(5):
        s = sum(X[i, j] * y[i] for i in range(20))
        t = sum(X[i, j] ** 2 for i in range(20))
        assert st.s[j] == pytest.approx(s, abs=1e-12)
        assert st.t[j] == pytest.approx(t, abs=1e-12)
        assert st.rho[j] == pytest.approx(abs(s) / np.sqrt(t * (y @ y)), abs=1e-12)
    np.testing.assert_allclose(st.rho ** 2 * st.t * st.c_y, st.s ** 2, rtol=1e-10)


def test_zero_column_is_degenerate(rng):
    X = rng.standard_normal((10, 3))
    X[:, 2] = 0.0
    st = precompute_marginals(Dataset(X, rng.standard_normal(10)))
    assert st.degenerate.tolist() == [False, False, True]
    assert st.rho[2] == 0.0


def test_precompute_is_pure(rng):
    d = Dataset(rng.standard_normal((15, 4)), rng.standard_normal(15))
    a, b = precompute_marginals(d), precompute_marginals(d)
    for f in ("s", "t", "rho"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_cross_product_cases(rng):
    X = rng.standard_normal((30, 8))
    d = Dataset(X, rng.standard_normal(30))
    assert cross_product_active(d, [], 3).shape == (0,)
    G = X.T @ X
    np.testing.assert_allclose(cross_product_active(d, [5, 1, 6], 2), G[[5, 1, 6], 2], atol=1e-12)
    full = build_full_gram(d)
    np.testing.assert_allclose(full.G0[[5, 1, 6], 2], cross_product_active(d, [5, 1, 6], 2), atol=1e-12)
    with pytest.raises(IndexError):
        cross_product_active(d, [0], 8)


def test_orthogonal_design_cross_products_vanish():
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 6)))
    d = Dataset(Q, np.ones(6))
    np.testing.assert_allclose(cross_product_active(d, [0, 1, 2], 4), 0.0, atol=1e-12)
    np.testing.assert_allclose(build_full_gram(d).G0, np.eye(6), atol=1e-12)


def test_full_gram_symmetric_entrywise(rng):
    X = rng.standard_normal((15, 6))
    G = build_full_gram(Dataset(X, np.zeros(15))).G0
    np.testing.assert_array_equal(G, G.T)
    for i in range(6):
        for j in range(6):
            assert G[i, j] == pytest.approx(float(np.dot(X[:, i], X[:, j])), abs=1e-12)


def test_gram_cap_refuses():
    d = Dataset(np.zeros((2, 100_000)), np.zeros(2))
    with pytest.raises(GramCapError, match="random-scan"):
        build_full_gram(d)
    with pytest.raises(GramCapError):
        build_full_gram(Dataset(np.zeros((2, 11)), np.zeros(2)), cap=10)


def test_active_columns_track_add_drop(rng):
    X = rng.standard_normal((12, 7))
    cols = ActiveColumns(X, [3, 0])
    cols.add(5)
    cols.drop(0)
    assert cols.active == [0, 5]
    np.testing.assert_allclose(cols.gram(), X[:, [0, 5]].T @ X[:, [0, 5]])
    np.testing.assert_allclose(cols.cross(2), X[:, [0, 5]].T @ X[:, 2])
    full = build_full_gram(Dataset(X, np.zeros(12)))
    full.reset([0, 5])
    np.testing.assert_allclose(full.cross(2), cols.cross(2), atol=1e-12)


def test_standardize(rng):
    X = rng.normal(3.0, 2.0, (40, 4))
    X[:, 3] = 1.5
    d = standardize(Dataset(X, rng.normal(5.0, 3.0, 40)))
    np.testing.assert_allclose(d.X.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(d.X[:, :3].std(axis=0, ddof=1), 1.0)
    assert np.all(d.X[:, 3] == 0.0)
    assert d.y.mean() == pytest.approx(0.0, abs=1e-12)
    assert d.y.std(ddof=1) == pytest.approx(1.0)
