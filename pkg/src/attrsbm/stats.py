"""Numerical primitives: Gaussian densities, log-sum-exp, scaling, PCA, k-means."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special

from .errors import ConfigError, DataError, NotPositiveDefiniteError, NumericalError

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
RIDGE_SCALE = 1e-6


def _cholesky(cov):
    try:
        return scipy.linalg.cholesky(cov, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError):
        return None


def ridge_covariance(cov):
    """Return ``(cov, cholesky_factor)``, adding ``eps * I`` when ``cov`` is not PD.

    ``eps`` is ``1e-6`` times the mean diagonal (``1e-6`` if that is not
    positive). Raises :class:`NotPositiveDefiniteError` when the ridged matrix
    still fails to factorize.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    cov = 0.5 * (cov + cov.T)
    chol = _cholesky(cov)
    if chol is not None:
        return cov, chol
    scale = float(np.mean(np.diag(cov))) if np.all(np.isfinite(cov)) else np.nan
    eps = RIDGE_SCALE * scale if scale > 0 else RIDGE_SCALE
    ridged = cov + eps * np.eye(len(cov))
    chol = _cholesky(ridged)
    if chol is None:
        if not np.all(np.isfinite(ridged)):
            raise NotPositiveDefiniteError(np.nan)
        raise NotPositiveDefiniteError(float(np.linalg.eigvalsh(ridged)[0]))
    return ridged, chol


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """Mean vector and covariance of one multivariate normal.

    The covariance is symmetrized and, if needed, ridge-regularized on
    construction so that it is always positive definite.
    """

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov, chol = ridge_covariance(self.cov)
        if cov.shape != (len(mean), len(mean)):
            raise DataError(f"covariance shape {cov.shape} does not match mean of length {len(mean)}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self) -> int:
        return len(self.mean)

    def logpdf(self, x):
        return mvn_logpdf(x, self)


def mvn_logpdf(x, comp: GaussianComponent):
    """Natural-log density of ``N(comp.mean, comp.cov)``.

    ``x`` may be a single vector of length ``p`` (returns a float) or an
    ``(n, p)`` array (returns an array of length ``n``).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if xs.shape[1] != comp.dim:
        raise DataError(f"dimension mismatch: x has {xs.shape[1]}, component has {comp.dim}")
    diff = xs - comp.mean
    sol = scipy.linalg.solve_triangular(comp.chol, diff.T, lower=True, check_finite=False)
    maha = np.einsum("ij,ij->j", sol, sol)
    logdet = 2.0 * np.sum(np.log(np.diag(comp.chol)))
    out = -0.5 * (comp.dim * LOG_2PI + logdet + maha)
    return float(out[0]) if single else out


def logsumexp(v, axis=None):
    """``log(sum(exp(v)))`` without overflow."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise DataError("logsumexp of an empty input")
    return scipy.special.logsumexp(v, axis=axis)


def constant_columns(X, tol=1e-12) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    spread = X.max(axis=0) - X.min(axis=0)
    return spread <= tol * np.maximum(1.0, np.abs(X).max(axis=0))


def standardize(X, column_names=None):
    """Center each column and scale it to unit sample (N-1) standard deviation.

    Constant columns become all zero and trigger a warning.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("standardize needs a 2-D array with at least 2 rows")
    flat = constant_columns(X)
    mu = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    sd[flat] = 1.0
    Z = (X - mu) / sd
    Z[:, flat] = 0.0
    if flat.any():
        which = np.flatnonzero(flat)
        if column_names is not None:
            which = [column_names[k] for k in which]
        warnings.warn(f"constant column(s) mapped to zero: {list(which)}", stacklevel=2)
    return Z


def pca_project(X, d: int):
    """Scores on the top-``d`` principal axes of the column-centered data.

    Axes come from an eigendecomposition of the sample covariance, ordered
    by decreasing eigenvalue, with each axis signed so that its largest
    magnitude loading is positive.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not 1 <= d <= p:
        raise ConfigError(f"d must lie in [1, {p}], got {d}")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / max(n - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:d]
    vecs = vecs[:, order]
    lead = np.abs(vecs).argmax(axis=0)
    signs = np.sign(vecs[lead, np.arange(d)])
    signs[signs == 0] = 1.0
    return centered @ (vecs * signs)


def pearson(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1 or len(u) < 2:
        raise DataError("pearson needs two vectors of equal length >= 2")
    du, dv = u - u.mean(), v - v.mean()
    nu, nv = np.sqrt(du @ du), np.sqrt(dv @ dv)
    if nu == 0 or nv == 0:
        raise NumericalError("correlation undefined for a constant input")
    return float(np.clip(du @ dv / (nu * nv), -1.0, 1.0))


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    history: list = field(default_factory=list)  # objective after every assignment
    n_iter: int = 0


def _kmeanspp(X, K, rng):
    n = len(X)
    centers = [int(rng.integers(n))]
    d2 = ((X - X[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0:
            rest = np.setdiff1d(np.arange(n), centers)
            nxt = int(rng.choice(rest))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        centers.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[centers].copy()


def kmeans(X, K: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm from a k-means++ start.

    Stops when an assignment step changes nothing or after ``max_iter``
    assignment steps. Empty clusters keep their previous centroid.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if not 1 <= K <= n:
        raise ConfigError(f"K must lie in [1, {n}], got {K}")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(X, K, rng)
    labels = None
    history = []
    for it in range(1, max_iter + 1):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            members = labels == k
            if members.any():
                centers[k] = X[members].mean(axis=0)
    return KMeansResult(labels.astype(np.int64), centers, history[-1], history, it)
