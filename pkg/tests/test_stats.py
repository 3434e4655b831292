import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from attrsbm.errors import ConfigError, DataError, NotPositiveDefiniteError, NumericalError
from attrsbm.stats import (GaussianComponent, kmeans, logsumexp, mvn_logpdf, pca_project, pearson,
                           ridge_covariance, standardize)


def test_mvn_logpdf_standard_values():
    std1 = GaussianComponent([0.0], [[1.0]])
    assert mvn_logpdf([0.0], std1) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)
    std2 = GaussianComponent([0.0, 0.0], np.eye(2))
    assert mvn_logpdf([0.0, 0.0], std2) == pytest.approx(-math.log(2 * math.pi), abs=1e-12)
    assert mvn_logpdf([1.0, 1.0], std2) == pytest.approx(-math.log(2 * math.pi) - 1.0, abs=1e-12)
    # printed reference values, rounded to 6 places
    assert round(mvn_logpdf([0.0], std1), 6) == -0.918939
    assert round(mvn_logpdf([1.0, 1.0], std2), 6) == -2.837877


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10_000))
def test_mvn_logpdf_matches_scipy(p, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(p, p))
    cov = A @ A.T + 0.5 * np.eye(p)
    mean = rng.normal(size=p)
    x = rng.normal(size=(7, p))
    comp = GaussianComponent(mean, cov)
    expect = sps.multivariate_normal(mean, cov).logpdf(x)
    assert np.allclose(mvn_logpdf(x, comp), np.atleast_1d(expect), atol=1e-9)


def test_density_integrates_to_one():
    comp = GaussianComponent([0.3, -0.2], [[1.0, 0.4], [0.4, 0.8]])
    grid = np.linspace(-9, 9, 601)
    xx, yy = np.meshgrid(grid, grid)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    h = grid[1] - grid[0]
    total = np.exp(mvn_logpdf(pts, comp)).sum() * h * h
    assert total == pytest.approx(1.0, abs=1e-6)


def test_mvn_dimension_mismatch():
    with pytest.raises(DataError):
        mvn_logpdf([0.0, 1.0, 2.0], GaussianComponent([0.0, 0.0], np.eye(2)))


def test_ridge_only_when_needed():
    cov = np.array([[2.0, 0.0], [0.0, 1.0]])
    out, _ = ridge_covariance(cov)
    assert np.array_equal(out, cov)
    singular = np.ones((2, 2))
    out, chol = ridge_covariance(singular)
    assert np.allclose(out, singular + 1e-6 * np.eye(2), atol=0)
    assert np.allclose(chol @ chol.T, out)
    zero, _ = ridge_covariance(np.zeros((2, 2)))
    assert np.allclose(zero, 1e-6 * np.eye(2))


def test_ridge_failure_reports_min_eigenvalue():
    with pytest.raises(NotPositiveDefiniteError) as err:
        ridge_covariance(np.diag([1.0, -5.0]))
    assert err.value.min_eigenvalue < 0


def test_logsumexp():
    assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2), abs=1e-12)
    assert logsumexp([-np.inf, 0.0]) == 0.0
    assert logsumexp([-np.inf, -np.inf]) == -np.inf
    with pytest.raises(DataError):
        logsumexp([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_logsumexp_against_direct_sum(v):
    assert logsumexp(v) == pytest.approx(math.log(sum(math.exp(x) for x in v)), rel=1e-12, abs=1e-12)


def test_standardize_columns():
    X = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 60.0]])
    Z = standardize(X)
    assert np.allclose(Z.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(Z.std(axis=0, ddof=1), 1, atol=1e-12)
    assert np.allclose(Z[:, 0], [-1.0, 0.0, 1.0])


def test_standardize_constant_column_warns():
    X = np.array([[1.0, 5.0], [2.0, 5.0], [4.0, 5.0]])
    with pytest.warns(UserWarning, match="constant"):
        Z = standardize(X)
    assert np.all(Z[:, 1] == 0)


def test_standardize_needs_rows():
    with pytest.raises(DataError):
        standardize(np.ones((1, 3)))


def test_pca_matches_svd_and_signs():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 6)) @ rng.normal(size=(6, 6))
    scores = pca_project(X, 3)
    centered = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    for k in range(3):
        v = vt[k] * np.sign(vt[k][np.abs(vt[k]).argmax()])
        assert np.allclose(scores[:, k], centered @ v, atol=1e-8)
    assert np.allclose(scores.var(axis=0, ddof=1), s[:3] ** 2 / 49)
    with pytest.raises(ConfigError):
        pca_project(X, 7)


def test_pearson_examples():
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(9 / math.sqrt(84), abs=1e-12)
    assert round(pearson([1, 2, 3], [1, 2, 4]), 6) == 0.981981
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    with pytest.raises(NumericalError):
        pearson([1, 1, 1], [1, 2, 3])


def test_kmeans_separated_blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(size=(30, 2)), rng.normal(size=(30, 2)) + 20])
    res = kmeans(X, 2, seed=1)
    assert len(set(res.labels[:30])) == 1 and len(set(res.labels[30:])) == 1
    assert res.labels[0] != res.labels[-1]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10_000))
def test_kmeans_objective_non_increasing(K, seed):
    X = np.random.default_rng(seed).normal(size=(25, 3))
    res = kmeans(X, K, seed=seed)
    assert all(b <= a + 1e-9 for a, b in zip(res.history, res.history[1:]))
    direct = float(((X - res.centers[res.labels]) ** 2).sum())
    assert res.inertia == pytest.approx(direct, rel=1e-9)


def test_kmeans_deterministic_and_validates():
    X = np.random.default_rng(5).normal(size=(20, 2))
    assert np.array_equal(kmeans(X, 3, seed=4).labels, kmeans(X, 3, seed=4).labels)
    with pytest.raises(ConfigError):
        kmeans(X, 0)
