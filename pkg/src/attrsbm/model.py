"""Stochastic block model with multivariate-Gaussian node attributes.

The fit is variational EM. Responsibilities are updated with a mean-field
E-step where each node sees the current soft memberships of all other
nodes, and the M-step re-estimates the block matrix, the per-community
Gaussians and the mixing weights. The quantity tracked per iteration is
the mean-field lower bound

    adjacency   0.5 * sum_{i!=j} sum_{k,l} g_ik g_jl [a_ij ln t_kl + (1-a_ij) ln(1-t_kl)]
    attributes  sum_i sum_c g_ic ln N(x_i | mu_c, S_c)
    membership  sum_i sum_c g_ic (ln pi_c - ln g_ic)

whose sum never decreases from one iteration to the next.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.special

from . import _kernels
from ._parallel import pmap
from .errors import ConfigError, DataError
from .graph import Graph
from .initialization import init_responsibilities, louvain
from .stats import GaussianComponent, kmeans, logsumexp

logger = logging.getLogger(__name__)

THETA_MIN = 1e-10
THETA_MAX = 1.0 - 1e-10
MASS_FLOOR = 1e-8
PI_FLOOR = 1e-6
EIG_FLOOR_SCALE = 1e-6

ATTRIBUTED = "attributed"
CLASSIC = "classic"
ATTRIBUTES_ONLY = "attributes-only"
MODES = (ATTRIBUTED, CLASSIC, ATTRIBUTES_ONLY)


@dataclass
class ModelParams:
    theta: np.ndarray
    psi: list | None
    pi: np.ndarray

    @property
    def K(self) -> int:
        return len(self.pi)

    @property
    def mu(self):
        return None if self.psi is None else np.array([c.mean for c in self.psi])

    @property
    def sigma(self):
        return None if self.psi is None else np.array([c.cov for c in self.psi])


@dataclass
class FitConfig:
    tol: float = 1e-6
    max_iter: int = 200
    restarts: int = 5
    seed: int = 0
    init: str = "auto"  # auto | louvain | kmeans | random
    smoothing: float = 0.1
    jobs: int = 1

    def restart_seeds(self):
        rng = np.random.default_rng(self.seed)
        return [int(s) for s in rng.integers(0, 2**31 - 1, size=max(1, self.restarts))]


@dataclass
class FitResult:
    params: ModelParams
    resp: np.ndarray
    partition: np.ndarray
    loglik_trace: list
    iterations: int
    converged: bool
    seed: int
    mode: str
    node_names: list | None = None
    reseeds: int = 0
    restart_seeds: list = field(default_factory=list)
    restart_bounds: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.params.K

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]["total"]

    def community_sizes(self):
        return np.bincount(self.partition, minlength=self.K)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "mode": self.mode,
            "K": self.K,
            "seed": self.seed,
            "converged": self.converged,
            "iterations": self.iterations,
            "loglik_trace": self.loglik_trace,
            "pi": p.pi,
            "theta": p.theta,
            "mu": p.mu,
            "sigma": p.sigma,
            "gamma": self.resp,
            "partition": self.partition,
            "node_names": self.node_names,
            "reseeds": self.reseeds,
            "restart_seeds": self.restart_seeds,
            "restart_bounds": self.restart_bounds,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        d = json.loads(text)
        psi = None
        if d.get("mu") is not None:
            psi = [GaussianComponent(np.asarray(m, float), np.asarray(s, float))
                   for m, s in zip(d["mu"], d["sigma"])]
        params = ModelParams(np.asarray(d["theta"], float), psi, np.asarray(d["pi"], float))
        trace = [{k: float(v) for k, v in row.items()} for row in d["loglik_trace"]]
        return cls(params, np.asarray(d["gamma"], float), np.asarray(d["partition"], np.int64), trace,
                   int(d["iterations"]), bool(d["converged"]), int(d["seed"]), d["mode"],
                   d.get("node_names"), int(d.get("reseeds", 0)), list(d.get("restart_seeds", [])),
                   [float(v) for v in d.get("restart_bounds", [])])


def _fmt(obj):
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite value {x}")
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _fmt(obj.tolist())
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    return _fmt(obj) + "\n"


# --------------------------------------------------------------------------
# likelihood terms

def attribute_logdens(X, psi) -> np.ndarray:
    """``(N, K)`` matrix of ``ln N(x_i | mu_c, Sigma_c)``."""
    return np.column_stack([c.logpdf(X) for c in psi])


def loglik_attributes(X, params: ModelParams) -> float:
    """Gaussian-mixture log-likelihood ``sum_i ln sum_c pi_c N(x_i | c)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with np.errstate(divide="ignore"):
        logpi = np.log(params.pi)
    return float(np.sum(logsumexp(attribute_logdens(X, params.psi) + logpi, axis=1)))


def block_counts(g: Graph, resp):
    """Expected edge counts ``E`` and dyad counts ``P`` between every block pair."""
    adj = g.adjacency()
    E = resp.T @ (adj @ resp)
    mass = resp.sum(axis=0)
    P = np.outer(mass, mass) - resp.T @ resp
    return 0.5 * (E + E.T), np.maximum(0.5 * (P + P.T), 0.0)


def clamp_theta(theta):
    return np.clip(theta, THETA_MIN, THETA_MAX)


def loglik_adjacency(g: Graph, resp, theta) -> float:
    """Expected complete-data adjacency log-likelihood under soft assignments.

    With one-hot ``resp`` this is the usual SBM complete-data likelihood.
    """
    resp = np.asarray(resp, dtype=float)
    if resp.shape[0] != g.node_count:
        raise DataError("responsibilities are not aligned with the graph")
    theta = clamp_theta(np.asarray(theta, dtype=float))
    E, P = block_counts(g, resp)
    return float(0.5 * np.sum(E * np.log(theta) + (P - E) * np.log1p(-theta)))


def membership_term(resp, pi) -> float:
    with np.errstate(divide="ignore"):
        logpi = np.log(pi)
    return float(np.sum(resp * logpi) - np.sum(scipy.special.xlogy(resp, resp)))


def bound_terms(g, X, params: ModelParams, resp, mode: str) -> dict:
    adjacency = 0.0 if mode == ATTRIBUTES_ONLY else loglik_adjacency(g, resp, params.theta)
    attributes = 0.0
    if mode != CLASSIC:
        attributes = float(np.sum(resp * attribute_logdens(X, params.psi)))
    membership = membership_term(resp, params.pi)
    return {
        "total": adjacency + attributes + membership,
        "adjacency": adjacency,
        "attributes": attributes,
        "membership": membership,
    }


# --------------------------------------------------------------------------
# E-step

def _infer_mode(g, X, mode):
    if mode is None:
        mode = CLASSIC if X is None else ATTRIBUTED
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if mode != CLASSIC and X is None:
        raise DataError(f"mode {mode!r} needs attributes")
    if mode != ATTRIBUTES_ONLY and g is None:
        raise DataError(f"mode {mode!r} needs a graph")
    return mode


def e_step(g: Graph | None, X, params: ModelParams, resp, mode: str | None = None,
           sequential: bool = True) -> np.ndarray:
    """Mean-field update of the responsibilities.

    ``log g_ic = ln pi_c + ln N(x_i|c) + sum_{j!=i} sum_l g_jl [a_ij ln t_cl + (1-a_ij) ln(1-t_cl)] + const``

    With ``sequential=True`` nodes are updated in index order and each uses
    the freshest rows of the others (this is what keeps the bound monotone);
    otherwise all rows are updated from ``resp`` at once. The attribute term
    is dropped in classic mode and the graph term in attributes-only mode.
    """
    mode = _infer_mode(g, X, mode)
    resp = np.array(resp, dtype=float)
    N, K = resp.shape
    if len(params.pi) != K:
        raise DataError("responsibilities and parameters disagree on K")
    with np.errstate(divide="ignore"):
        base = np.tile(np.log(params.pi), (N, 1))
    if mode != CLASSIC:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(X) != N:
            raise DataError("attributes are not aligned with the responsibilities")
        base = base + attribute_logdens(X, params.psi)
    if mode == ATTRIBUTES_ONLY:
        return np.exp(base - logsumexp(base, axis=1)[:, None])
    if g.node_count != N:
        raise DataError("graph is not aligned with the responsibilities")
    theta = clamp_theta(params.theta)
    log_t, log_1mt = np.log(theta), np.log1p(-theta)
    if sequential:
        adj = g.adjacency()
        return _kernels.sequential_sweep(
            adj.indptr.astype(np.int64), adj.indices.astype(np.int64), base, resp,
            log_t, log_1mt, np.arange(N, dtype=np.int64))
    M = g.adjacency() @ resp
    S = np.maximum(resp.sum(axis=0)[None, :] - resp - M, 0.0)
    score = base + M @ log_t.T + S @ log_1mt.T
    return np.exp(score - logsumexp(score, axis=1)[:, None])


# --------------------------------------------------------------------------
# M-step

def m_step_pi(resp, floor: float = 0.0) -> np.ndarray:
    """Mixing weights as column means of ``resp``, optionally floored and renormalized."""
    pi = np.asarray(resp, dtype=float).mean(axis=0)
    if floor > 0:
        pi = np.maximum(pi, floor)
    return pi / pi.sum()


def m_step_theta(g: Graph, resp) -> np.ndarray:
    """Block matrix ``t_ql = sum_{i!=j} g_iq g_jl a_ij / sum_{i!=j} g_iq g_jl``."""
    E, P = block_counts(g, np.asarray(resp, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(P > 0, E / np.where(P > 0, P, 1.0), 0.0)
    return clamp_theta(0.5 * (theta + theta.T))


def covariance_floor(X) -> float:
    """Smallest eigenvalue allowed in a community covariance.

    ``1e-6`` times the mean diagonal of the global covariance of ``X``
    (``1e-6`` when that is zero). It is fixed for a given ``X``, so the
    eigenvalue-constrained M-step below maximizes the same objective at
    every iteration.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    scale = float(np.mean(X.var(axis=0)))
    return EIG_FLOOR_SCALE * scale if scale > 0 else EIG_FLOOR_SCALE


def _floor_eigenvalues(cov, floor):
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] >= floor:
        return cov
    # constrained Gaussian MLE: clip the spectrum of the weighted covariance
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def m_step_gaussian(X, resp, floor: float | None = None) -> list:
    """Responsibility-weighted means and covariances, one component per column.

    Covariance eigenvalues below ``floor`` (default :func:`covariance_floor`)
    are raised to it; covariances already above the floor are the plain
    weighted MLE. Without the floor, a community that collapses onto ``p`` or
    fewer points has an unbounded likelihood.

    A column whose total mass is below ``1e-8`` is re-seeded: its mean is the
    attribute vector of the least confidently assigned node and its
    covariance the global covariance of ``X``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    resp = np.asarray(resp, dtype=float)
    if floor is None:
        floor = covariance_floor(X)
    mass = resp.sum(axis=0)
    comps = [None] * resp.shape[1]
    candidates = None
    for c in range(resp.shape[1]):
        if mass[c] < MASS_FLOOR:
            if candidates is None:
                candidates = list(np.argsort(resp.max(axis=1), kind="stable"))
            node = candidates.pop(0) if candidates else 0
            diff = X - X.mean(axis=0)
            comps[c] = GaussianComponent(X[node], _floor_eigenvalues(diff.T @ diff / len(X), floor))
            continue
        w = resp[:, c] / mass[c]
        mu = w @ X
        diff = X - mu
        comps[c] = GaussianComponent(mu, _floor_eigenvalues((diff * w[:, None]).T @ diff, floor))
    return comps


def m_step(g, X, resp, mode: str) -> ModelParams:
    K = resp.shape[1]
    theta = m_step_theta(g, resp) if mode != ATTRIBUTES_ONLY else np.full((K, K), THETA_MIN)
    psi = m_step_gaussian(X, resp) if mode != CLASSIC else None
    return ModelParams(theta, psi, m_step_pi(resp, floor=PI_FLOOR))


# --------------------------------------------------------------------------
# fitting

def initial_responsibilities(g, X, K, config: FitConfig, seed: int, mode: str) -> np.ndarray:
    strategy = config.init
    if strategy == "auto":
        strategy = "kmeans" if mode == ATTRIBUTES_ONLY else "louvain"
    N = g.node_count if g is not None else len(X)
    if strategy == "louvain":
        if g is None:
            raise ConfigError("louvain initialization needs a graph")
        part = louvain(g, seed)
    elif strategy == "kmeans":
        if X is None:
            raise ConfigError("kmeans initialization needs attributes")
        part = kmeans(X, K, seed).labels
    elif strategy == "random":
        part = np.random.default_rng(seed).permutation(np.arange(N) % K)
    else:
        raise ConfigError(f"unknown init strategy {strategy!r}")
    return init_responsibilities(part, K, config.smoothing, g=g, X=X, seed=seed)


def fit_once(g, X, K, config: FitConfig, seed: int, mode: str, resp=None) -> FitResult:
    """One EM run from one starting point."""
    if resp is None:
        resp = initial_responsibilities(g, X, K, config, seed, mode)
    resp = np.array(resp, dtype=float)
    trace = []
    converged = False
    reseeds = 0
    params = None
    for it in range(1, config.max_iter + 1):
        if mode != CLASSIC:
            reseeds += int(np.sum(resp.sum(axis=0) < MASS_FLOOR))
        params = m_step(g, X, resp, mode)
        trace.append(bound_terms(g, X, params, resp, mode))
        if it > 1 and abs(trace[-1]["total"] - trace[-2]["total"]) < config.tol:
            converged = True
            break
        if it == config.max_iter:
            break
        resp = e_step(g, X, params, resp, mode)
    partition = resp.argmax(axis=1).astype(np.int64)
    names = None
    if g is not None and g.node_names is not None:
        names = list(g.node_names)
    return FitResult(params, resp, partition, trace, len(trace), converged, seed, mode, names, reseeds)


def _fit_job(args):
    g, X, K, config, seed, mode = args
    return fit_once(g, X, K, config, seed, mode)


def fit(g: Graph | None, X, K: int, config: FitConfig | None = None, mode: str | None = None) -> FitResult:
    """Fit the model with ``config.restarts`` starts and keep the best bound.

    ``mode`` defaults to ``"attributed"`` when ``X`` is given and
    ``"classic"`` otherwise. ``"attributes-only"`` ignores ``g`` and fits a
    plain Gaussian mixture. Classic mode never touches ``X``.
    """
    config = config or FitConfig()
    mode = _infer_mode(g, X, mode)
    if mode == CLASSIC:
        X = None
    if mode == ATTRIBUTES_ONLY:
        g_used = None
    else:
        g_used = g
    if X is not None:
        X = np.atleast_2d(np.asarray(X, dtype=float))
    N = g_used.node_count if g_used is not None else len(X)
    if X is not None and len(X) != N:
        raise DataError(f"attributes have {len(X)} rows but the graph has {N} nodes")
    if K < 1:
        raise ConfigError("K must be >= 1")
    if K > N:
        raise ConfigError(f"K={K} exceeds the number of nodes {N}")
    seeds = config.restart_seeds()
    runs = pmap(_fit_job, [(g_used, X, K, config, s, mode) for s in seeds], config.jobs)
    best = max(range(len(runs)), key=lambda r: (runs[r].loglik, -r))
    result = runs[best]
    result.restart_seeds = seeds
    result.restart_bounds = [r.loglik for r in runs]
    if g is not None and g.node_names is not None:
        result.node_names = list(g.node_names)
    return result


# --------------------------------------------------------------------------
# model selection

def complete_loglik(g, X, result: FitResult) -> dict:
    """Complete-data log-likelihood at the hard partition of ``result``."""
    K = result.K
    z = result.partition
    hard = np.zeros((len(z), K))
    hard[np.arange(len(z)), z] = 1.0
    p = result.params
    adjacency = 0.0 if result.mode == ATTRIBUTES_ONLY else loglik_adjacency(g, hard, p.theta)
    attributes = 0.0
    if result.mode != CLASSIC:
        attributes = float(np.sum(attribute_logdens(X, p.psi)[np.arange(len(z)), z]))
    with np.errstate(divide="ignore"):
        labels = float(np.sum(np.log(p.pi)[z]))
    return {"adjacency": adjacency, "attributes": attributes, "labels": labels,
            "total": adjacency + attributes + labels}


def icl(g, X, result: FitResult) -> float:
    """ICL-style penalized complete-data likelihood."""
    K = result.K
    N = len(result.partition)
    score = complete_loglik(g, X, result)["total"]
    if result.mode != ATTRIBUTES_ONLY:
        score -= 0.5 * (K * (K + 1) / 2) * math.log(max(N * (N - 1) / 2, 1.0))
    score -= 0.5 * (K - 1) * math.log(N)
    if result.mode != CLASSIC:
        dim = np.atleast_2d(X).shape[1]
        score -= 0.5 * K * (dim + dim * (dim + 1) / 2) * math.log(N)
    return float(score)


def select_k(g, X, k_range, config: FitConfig | None = None, mode: str | None = None):
    """Fit every ``K`` in ``k_range`` and keep the one with the highest ICL.

    Returns ``(K, FitResult, scores)`` where ``scores`` maps each K to its ICL.
    Ties go to the smaller K.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ConfigError("empty K range")
    config = config or FitConfig()
    mode = _infer_mode(g, X, mode)
    N = g.node_count if g is not None else len(X)
    if ks[0] < 1 or ks[-1] > N:
        raise ConfigError(f"K range must lie within [1, {N}]")
    fits, scores = {}, {}
    for k in ks:
        fits[k] = fit(g, X, k, config, mode)
        scores[k] = icl(g, X if mode != CLASSIC else None, fits[k])
    chosen = max(ks, key=lambda k: (scores[k], -k))
    return chosen, fits[chosen], scores


def with_config(config: FitConfig | None, **changes) -> FitConfig:
    return replace(config or FitConfig(), **changes)
