"""Link prediction and collaborative filtering with a fitted model and classic baselines."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from ._parallel import pmap
from .errors import ConfigError, DataError
from .graph import Graph
from .metrics import RocCurve, roc_auc
from .model import ATTRIBUTED, FitConfig, FitResult, attribute_logdens, fit

LINK_METHODS = ("attr_sbm", "jaccard", "adamic_adar", "pref_attach")
CF_METHODS = ("attr_sbm", "neighbor_avg", "weighted_avg")
LINK_HEADER = ["method", "sample", "i", "j", "truth", "score"]
CF_HEADER = ["node", "method", "relative_error", "skip_reason"]


# --------------------------------------------------------------------------
# neighborhood scorers

def score_jaccard(g: Graph, m: int, n: int) -> float:
    a, b = g.neighbors(m), g.neighbors(n)
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def score_adamic_adar(g: Graph, m: int, n: int) -> float:
    # a common neighbor touches both m and n, so its degree is at least 2
    return float(sum(1.0 / math.log(g.degree(c)) for c in g.neighbors(m) & g.neighbors(n)))


def score_pref_attach(g: Graph, m: int, n: int) -> float:
    return float(g.degree(m) * g.degree(n))


BASELINES = {"jaccard": score_jaccard, "adamic_adar": score_adamic_adar, "pref_attach": score_pref_attach}


def nearest_nodes(X_train, x, k: int = 1) -> np.ndarray:
    """Indices of the ``k`` training rows closest to ``x`` (ties to the lower index)."""
    d = np.sqrt(((np.asarray(X_train, dtype=float) - np.asarray(x, dtype=float)) ** 2).sum(axis=1))
    return np.argsort(d, kind="stable")[:k]


def majority(labels, K: int | None = None) -> int:
    """Most frequent label; ties go to the lowest label."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise DataError("majority vote over no labels")
    return int(np.argmax(np.bincount(labels, minlength=K or 0)))


def stub_community(fit_result: FitResult, X_train, x, k: int = 3, vote: str = "knn") -> int:
    """Community assigned to an unseen node from its attribute vector alone.

    ``vote="knn"`` takes the majority community of the ``k`` nearest training
    nodes; ``vote="direct"`` takes the most probable mixture component.
    """
    if vote == "knn":
        idx = nearest_nodes(X_train, x, min(k, len(X_train)))
        return majority(fit_result.partition[idx], fit_result.K)
    if vote == "direct":
        logp = attribute_logdens(np.atleast_2d(x), fit_result.params.psi)[0] + np.log(fit_result.params.pi)
        return int(np.argmax(logp))
    raise ConfigError(f"unknown vote {vote!r}")


def score_attr_sbm(fit_result: FitResult, X_train, x_m, x_n, k: int = 3, vote: str = "knn") -> float:
    """Block probability between the communities assigned to two attribute vectors."""
    if fit_result.params.psi is None and vote == "direct":
        raise ConfigError("direct voting needs an attributed fit")
    cm = stub_community(fit_result, X_train, x_m, k, vote)
    cn = stub_community(fit_result, X_train, x_n, k, vote)
    return float(fit_result.params.theta[cm, cn])


# --------------------------------------------------------------------------
# link-prediction protocol

@dataclass
class LinkPredConfig:
    K: int
    samples: int = 10
    positives: int = 25
    negatives: int = 25
    seed: int = 0
    knn: int = 3
    vote: str = "knn"  # knn | direct
    protocol: str = "per-dyad"  # per-dyad | fast
    fit: FitConfig = field(default_factory=FitConfig)
    jobs: int = 1


@dataclass
class ScoredDyads:
    method: str
    pairs: list  # (sample, i, j)
    scores: list


@dataclass
class LinkPredResult:
    records: list  # (method, sample, i, j, truth, score)
    roc: dict
    metadata: dict

    @property
    def auc(self) -> dict:
        return {m: r.auc for m, r in self.roc.items()}

    def scored(self, method) -> ScoredDyads:
        rows = [r for r in self.records if r[0] == method]
        return ScoredDyads(method, [(r[1], r[2], r[3]) for r in rows], [r[5] for r in rows])

    def to_csv(self, node_names=None) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(LINK_HEADER)
        for method, s, i, j, truth, score in self.records:
            if node_names is not None:
                i, j = node_names[i], node_names[j]
            w.writerow([method, s, i, j, int(truth), repr(float(score))])
        return out.getvalue()

    def summary(self) -> dict:
        return {"auc": self.auc,
                "roc": {m: {"fpr": r.fpr.tolist(), "tpr": r.tpr.tolist()} for m, r in self.roc.items()},
                "metadata": self.metadata}


def sample_dyads(g: Graph, positives: int, negatives: int, rng):
    """Distinct edges and distinct non-edges, drawn without replacement."""
    N = g.node_count
    n_non = N * (N - 1) // 2 - g.n_edges
    if g.n_edges < positives or n_non < negatives:
        raise DataError(f"need >= {positives} edges and >= {negatives} non-edges")
    pos = [tuple(int(v) for v in g.edges[k]) for k in rng.choice(g.n_edges, positives, replace=False)]
    neg = set()
    while len(neg) < negatives:
        i, j = rng.choice(N, 2, replace=False)
        i, j = int(min(i, j)), int(max(i, j))
        if not g.has_edge(i, j):
            neg.add((i, j))
    return pos, sorted(neg)


def _proxies(X_train, x_m, x_n):
    m = int(nearest_nodes(X_train, x_m, 1)[0])
    cand = nearest_nodes(X_train, x_n, 2)
    n = int(cand[0]) if cand[0] != m or len(cand) == 1 else int(cand[1])
    return m, n


def score_dyad(g_train: Graph, X_train, fit_result: FitResult, x_m, x_n, knn=3, vote="knn") -> dict:
    """Scores for one held-out dyad from attributes of its two removed stubs.

    Deliberately receives no edge indicator: only the training graph and the
    stubs' attribute vectors.
    """
    out = {"attr_sbm": score_attr_sbm(fit_result, X_train, x_m, x_n, knn, vote)}
    m, n = _proxies(X_train, x_m, x_n)
    for name, fn in BASELINES.items():
        out[name] = fn(g_train, m, n)
    return out


def _dyad_job(args):
    g, X, drop, dyads, cfg = args
    g_train, keep = g.without_nodes(drop)
    X_train = X[keep]
    if g_train.node_count < cfg.K:
        raise ConfigError("too few training nodes left for the requested K")
    fr = fit(g_train, X_train, cfg.K, cfg.fit, ATTRIBUTED)
    return [score_dyad(g_train, X_train, fr, X[i], X[j], cfg.knn, cfg.vote) for i, j in dyads]


def link_prediction_experiment(g: Graph, X, config: LinkPredConfig) -> LinkPredResult:
    """Held-out dyad scoring with refits that never see the dyad's endpoints.

    ``protocol="per-dyad"`` refits for every dyad after removing its two
    endpoint nodes. ``protocol="fast"`` refits once per sample after removing
    every endpoint in the sample (not the reference protocol; labeled as such
    in the metadata).
    """
    X = np.asarray(X, dtype=float)
    if len(X) != g.node_count:
        raise DataError("attributes are not aligned with the graph")
    if config.protocol not in ("per-dyad", "fast"):
        raise ConfigError(f"unknown protocol {config.protocol!r}")
    g = g.unweighted()
    rng = np.random.default_rng(config.seed)
    samples = []
    for s in range(config.samples):
        pos, neg = sample_dyads(g, config.positives, config.negatives, rng)
        samples.append([(i, j, True) for i, j in pos] + [(i, j, False) for i, j in neg])
    jobs = []
    for dyads in samples:
        pairs = [(i, j) for i, j, _ in dyads]
        if config.protocol == "per-dyad":
            jobs.extend((g, X, [i, j], [(i, j)], config) for i, j in pairs)
        else:
            drop = sorted({v for p in pairs for v in p})
            jobs.append((g, X, drop, pairs, config))
    scored = [row for batch in pmap(_dyad_job, jobs, config.jobs) for row in batch]
    records = []
    k = 0
    for s, dyads in enumerate(samples):
        for i, j, truth in dyads:
            for method in LINK_METHODS:
                records.append((method, s, i, j, truth, scored[k][method]))
            k += 1
    roc = {}
    for method in LINK_METHODS:
        rows = [r for r in records if r[0] == method]
        roc[method] = roc_auc([(r[5], r[4]) for r in rows])
    meta = {"protocol": config.protocol,
            "reference_protocol": config.protocol == "per-dyad",
            "config": {k: v for k, v in asdict(config).items()}}
    return LinkPredResult(records, roc, meta)


# --------------------------------------------------------------------------
# collaborative filtering

def relative_error(x_hat, x) -> float:
    x_hat = np.asarray(x_hat, dtype=float)
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise DataError("relative error undefined for a zero-norm truth vector")
    return float(np.linalg.norm(x_hat - x) / norm)


def _top_neighbors(g: Graph, i: int, k: int | None):
    nbrs = g.neighbor_array(i)
    if len(nbrs) == 0:
        raise DataError(f"node {i} has no neighbors")
    if g.weights is not None:
        w = np.array([g.edge_weight(i, int(j)) for j in nbrs])
        order = np.lexsort((nbrs, -w))
        nbrs, w = nbrs[order], w[order]
    else:
        w = np.ones(len(nbrs))
    if k is not None:
        nbrs, w = nbrs[:k], w[:k]
    return nbrs, w


def cf_neighbor_avg(g: Graph, X, i: int, k: int | None = None) -> np.ndarray:
    """Plain mean of the attributes of up to ``k`` network neighbors of ``i``."""
    nbrs, _ = _top_neighbors(g, i, k)
    return np.asarray(X, dtype=float)[nbrs].mean(axis=0)


def cf_weighted_avg(g: Graph, X, i: int, k: int | None = None) -> np.ndarray:
    """Edge-weight-weighted mean over up to ``k`` neighbors (unit weights if unweighted)."""
    nbrs, w = _top_neighbors(g, i, k)
    total = w.sum()
    if total <= 0:
        raise DataError(f"total neighbor weight of node {i} is not positive")
    X = np.asarray(X, dtype=float)
    if np.all(w == w[0]):
        # same arithmetic as the plain mean so the two agree bit for bit
        return X[nbrs].mean(axis=0)
    return (w / total) @ X[nbrs]


def cf_attr_sbm(fit_result: FitResult, neighbors) -> np.ndarray:
    """Mean vector of the majority community among ``neighbors`` (training indices)."""
    neighbors = np.asarray(neighbors, dtype=np.int64)
    if len(neighbors) == 0:
        raise DataError("no neighbors to vote with")
    c = majority(fit_result.partition[neighbors], fit_result.K)
    return fit_result.params.psi[c].mean.copy()


@dataclass
class CFConfig:
    K: int
    k_neighbors: int | None = None
    fit: FitConfig = field(default_factory=FitConfig)
    jobs: int = 1


@dataclass
class CFResult:
    records: list  # (node, method, error or None, skip_reason or "")
    metadata: dict

    def errors(self, method) -> np.ndarray:
        return np.array([e for _, m, e, _ in self.records if m == method and e is not None])

    def means(self) -> dict:
        return {m: float(self.errors(m).mean()) if len(self.errors(m)) else float("nan") for m in CF_METHODS}

    def skipped(self) -> dict:
        return {n: r for n, m, _, r in self.records if r and m == CF_METHODS[0]}

    def to_csv(self, node_names=None) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CF_HEADER)
        for node, method, err, reason in self.records:
            name = node_names[node] if node_names is not None else node
            w.writerow([name, method, "" if err is None else repr(float(err)), reason])
        return out.getvalue()


def _cf_job(args):
    g, X, i, cfg = args
    x = X[i]
    if np.linalg.norm(x) == 0:
        return {m: (None, "zero_norm") for m in CF_METHODS}
    if g.degree(i) == 0:
        return {m: (None, "no_neighbors") for m in CF_METHODS}
    masked = X.copy()
    masked[i] = np.nan  # the held-out row must never reach a predictor
    g_train, keep = g.without_nodes([i])
    pos = np.searchsorted(keep, g.neighbor_array(i))
    fr = fit(g_train.unweighted(), masked[keep], cfg.K, cfg.fit, ATTRIBUTED)
    preds = {
        "attr_sbm": cf_attr_sbm(fr, pos),
        "neighbor_avg": cf_neighbor_avg(g, masked, i, cfg.k_neighbors),
        "weighted_avg": cf_weighted_avg(g, masked, i, cfg.k_neighbors),
    }
    return {m: (relative_error(preds[m], x), "") for m in CF_METHODS}


def collab_experiment(g: Graph, X, config: CFConfig) -> CFResult:
    """Leave-one-out attribute prediction for every node."""
    X = np.asarray(X, dtype=float)
    if g.node_count < 3:
        raise DataError("collaborative filtering needs at least 3 nodes")
    if len(X) != g.node_count:
        raise DataError("attributes are not aligned with the graph")
    outcomes = pmap(_cf_job, [(g, X, i, config) for i in range(g.node_count)], config.jobs)
    records = []
    for i, out in enumerate(outcomes):
        for m in CF_METHODS:
            err, reason = out[m]
            records.append((i, m, err, reason))
    meta = {"config": asdict(config), "k_neighbors": config.k_neighbors or "all"}
    return CFResult(records, meta)
