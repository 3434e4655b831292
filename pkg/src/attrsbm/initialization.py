"""Starting points for EM: Louvain modularity clustering and its coercion to K groups."""
from __future__ import annotations

from collections import defaultdict

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError
from .graph import Graph
from .stats import kmeans


def relabel(labels) -> np.ndarray:
    """Map labels to ``0..C-1`` in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inv.ravel()]


def modularity(g: Graph, partition, weighted: bool = False) -> float:
    """Newman-Girvan modularity at resolution 1."""
    adj = g.weight_matrix() if weighted else g.adjacency()
    two_m = adj.sum()
    if two_m == 0:
        return 0.0
    labels = relabel(partition)
    C = labels.max() + 1
    member = sp.csr_matrix((np.ones(len(labels)), (np.arange(len(labels)), labels)), shape=(len(labels), C))
    inner = (member.T @ adj @ member).diagonal()
    strength = np.asarray(adj.sum(axis=1)).ravel()
    tot = np.bincount(labels, weights=strength, minlength=C)
    return float(np.sum(inner / two_m - (tot / two_m) ** 2))


def _local_moves(nbrs, k, two_m, rng):
    n = len(k)
    comm = np.arange(n)
    tot = k.astype(float).copy()
    moved = False
    improved = True
    while improved:
        improved = False
        for i in rng.permutation(n):
            ci = comm[i]
            links = defaultdict(float)
            for j, w in nbrs[i].items():
                links[comm[j]] += w
            tot[ci] -= k[i]
            best = ci
            best_gain = links.get(ci, 0.0) - tot[ci] * k[i] / two_m
            for c, w in links.items():
                gain = w - tot[c] * k[i] / two_m
                if gain > best_gain + 1e-12:
                    best, best_gain = c, gain
            tot[best] += k[i]
            if best != ci:
                comm[i] = best
                improved = moved = True
    return relabel(comm), moved


def _aggregate(nbrs, loops, comm):
    C = comm.max() + 1
    new_nbrs = [defaultdict(float) for _ in range(C)]
    new_loops = np.zeros(C)
    for i, row in enumerate(nbrs):
        ci = comm[i]
        new_loops[ci] += loops[i]
        for j, w in row.items():
            cj = comm[j]
            if ci == cj:
                new_loops[ci] += w / 2.0  # each internal edge is seen from both ends
            else:
                new_nbrs[ci][cj] += w
    return [dict(r) for r in new_nbrs], new_loops


def split_disconnected(g: Graph, labels) -> np.ndarray:
    """Split every community into its connected components within ``g``."""
    labels = np.asarray(labels)
    adj = g.adjacency().tocoo()
    same = labels[adj.row] == labels[adj.col]
    inner = sp.csr_matrix((adj.data[same], (adj.row[same], adj.col[same])), shape=adj.shape)
    _, comp = connected_components(inner, directed=False)
    return relabel(comp)


def louvain(g: Graph, seed: int = 0, weighted: bool = False, return_history: bool = False):
    """Two-phase greedy modularity maximization.

    Node visiting order in every local-move phase is shuffled with ``seed``.
    Communities that end up disconnected are split into their components,
    which can only raise modularity.
    """
    rng = np.random.default_rng(seed)
    n = g.node_count
    membership = np.arange(n)
    history = [modularity(g, membership, weighted)]
    if g.n_edges == 0:
        return (membership, history) if return_history else membership
    w = g.weights if (weighted and g.weights is not None) else np.ones(g.n_edges)
    nbrs = [dict() for _ in range(n)]
    for (i, j), wij in zip(g.edges, w):
        nbrs[i][j] = nbrs[i].get(j, 0.0) + wij
        nbrs[j][i] = nbrs[j].get(i, 0.0) + wij
    loops = np.zeros(n)
    two_m = 2.0 * float(np.sum(w))
    while True:
        k = np.array([2.0 * loops[i] + sum(nbrs[i].values()) for i in range(len(nbrs))])
        comm, moved = _local_moves(nbrs, k, two_m, rng)
        if not moved:
            break
        membership = comm[membership]
        q = modularity(g, membership, weighted)
        if q < history[-1] - 1e-12:
            raise AssertionError(f"modularity decreased across a phase: {history[-1]} -> {q}")
        history.append(q)
        nbrs, loops = _aggregate(nbrs, loops, comm)
    membership = split_disconnected(g, membership)
    history.append(modularity(g, membership, weighted))
    return (membership, history) if return_history else membership


def _merge_smallest(labels, adj):
    C = labels.max() + 1
    sizes = np.bincount(labels, minlength=C)
    small = int(np.argmin(sizes))  # lowest label among the smallest
    member = sp.csr_matrix((np.ones(len(labels)), (np.arange(len(labels)), labels)), shape=(len(labels), C))
    links = np.asarray((member[:, small].T @ adj @ member).todense()).ravel()
    links[small] = -1.0
    if links.max() > 0:
        target = int(np.argmax(links))
    else:
        others = sizes.astype(float)
        others[small] = np.inf
        target = int(np.argmin(others))
    labels = labels.copy()
    labels[labels == small] = target
    return relabel(labels)


def _split_largest(labels, X, rng, seed):
    C = labels.max() + 1
    sizes = np.bincount(labels, minlength=C)
    big = int(np.argmax(sizes))
    members = np.flatnonzero(labels == big)
    part = None
    if X is not None:
        km = kmeans(X[members], 2, seed=seed)
        if 0 < km.labels.sum() < len(members):
            part = km.labels.astype(bool)
    if part is None:
        part = np.zeros(len(members), dtype=bool)
        part[rng.permutation(len(members))[: len(members) // 2]] = True
    labels = labels.copy()
    labels[members[part]] = C
    return labels


def coerce_partition(partition, K: int, g: Graph | None = None, X=None, seed: int = 0) -> np.ndarray:
    """Merge or split communities until exactly ``K`` remain.

    Surplus: the smallest community joins the community it shares the most
    edges with (the smallest other community if it has no outside edges).
    Shortfall: the largest community is split in two by 2-means on its
    attributes, or into random halves without attributes.
    """
    labels = relabel(partition)
    if K < 1:
        raise ConfigError("K_target must be >= 1")
    if K > len(labels):
        raise ConfigError(f"K_target={K} exceeds the number of nodes {len(labels)}")
    adj = g.adjacency() if g is not None else sp.csr_matrix((len(labels), len(labels)))
    rng = np.random.default_rng(seed)
    X = None if X is None else np.asarray(X, dtype=float)
    while labels.max() + 1 > K:
        labels = _merge_smallest(labels, adj)
    while labels.max() + 1 < K:
        labels = _split_largest(labels, X, rng, seed)
    return labels


def soften(labels, K: int, smoothing: float) -> np.ndarray:
    """One-hot rows softened to ``1 - smoothing`` on the assigned community."""
    if not 0 <= smoothing < 1:
        raise ConfigError("smoothing must lie in [0, 1)")
    labels = np.asarray(labels)
    if K == 1:
        return np.ones((len(labels), 1))
    # a multiple of 2**-40 keeps every row sum exactly 1.0 in floating point
    off = np.round(smoothing / (K - 1) * 2.0**40) / 2.0**40
    resp = np.full((len(labels), K), off)
    resp[np.arange(len(labels)), labels] = 1.0 - off * (K - 1)
    return resp


def init_responsibilities(part, K_target: int, smoothing: float = 0.1, g: Graph | None = None, X=None,
                          seed: int = 0) -> np.ndarray:
    """Coerce ``part`` to ``K_target`` groups and soften it into responsibilities."""
    return soften(coerce_partition(part, K_target, g, X, seed), K_target, smoothing)
