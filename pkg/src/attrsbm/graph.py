"""Undirected simple graphs, edge-list and CSV I/O, and network construction.

Nodes are dense 0-based integer indices; external string identifiers are
kept in ``Graph.node_names`` and only used at the file boundary.
"""
from __future__ import annotations

import csv
import io
import logging
import os
from collections import deque
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError, ParseError

logger = logging.getLogger(__name__)

_NODES_DIRECTIVE = "# nodes:"


class Graph:
    """Immutable undirected simple graph.

    Parameters
    ----------
    node_count : int
        Number of nodes ``N``.
    edges : iterable of (int, int)
        Unordered node pairs. Duplicates collapse (the last weight wins).
    weights : iterable of float, optional
        One finite weight per entry of ``edges``.
    node_names : sequence of str, optional
        External identifiers, one per node.
    """

    def __init__(self, node_count, edges=(), weights=None, node_names=None):
        node_count = int(node_count)
        if node_count < 1:
            raise DataError("graph needs at least one node")
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if weights is not None:
            weights = np.asarray(list(weights), dtype=float)
            if weights.shape != (len(pairs),):
                raise DataError("exactly one weight per edge is required")
            if not np.all(np.isfinite(weights)):
                raise DataError("edge weights must be finite")
        if len(pairs):
            if pairs.min() < 0 or pairs.max() >= node_count:
                raise DataError(f"edge endpoint outside [0, {node_count})")
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise DataError("self-loop")
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        key = lo * node_count + hi
        # keep the last occurrence of every duplicate pair
        _, last = np.unique(key[::-1], return_index=True)
        order = len(key) - 1 - last
        self._edges = np.column_stack([lo[order], hi[order]])
        self._edges.setflags(write=False)
        self._weights = None
        if weights is not None:
            self._weights = weights[order]
            self._weights.setflags(write=False)
        if node_names is not None:
            node_names = tuple(str(n) for n in node_names)
            if len(node_names) != node_count:
                raise DataError("node_names length must equal node_count")
            if len(set(node_names)) != node_count:
                raise DataError("node_names must be unique")
        self._names = node_names
        self._n = node_count
        self._adj = None
        self._nbrs = None

    @property
    def node_count(self) -> int:
        return self._n

    @property
    def edges(self) -> np.ndarray:
        """``(E, 2)`` array of pairs with ``i < j``, sorted."""
        return self._edges

    @property
    def weights(self):
        return self._weights

    @property
    def node_names(self):
        return self._names

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    @property
    def is_weighted(self) -> bool:
        return self._weights is not None

    def __repr__(self):
        return f"Graph(N={self._n}, E={self.n_edges}, weighted={self.is_weighted})"

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        if self._n != other._n or self._names != other._names:
            return False
        if not np.array_equal(self._edges, other._edges):
            return False
        if (self._weights is None) != (other._weights is None):
            return False
        return self._weights is None or np.array_equal(self._weights, other._weights)

    __hash__ = None

    def names(self) -> list[str]:
        """External names, falling back to the decimal index."""
        if self._names is not None:
            return list(self._names)
        return [str(i) for i in range(self._n)]

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency as CSR (weights ignored)."""
        if self._adj is None:
            e = self._edges
            data = np.ones(2 * len(e))
            rows = np.concatenate([e[:, 0], e[:, 1]])
            cols = np.concatenate([e[:, 1], e[:, 0]])
            adj = sp.csr_matrix((data, (rows, cols)), shape=(self._n, self._n))
            adj.sort_indices()
            self._adj = adj
        return self._adj

    def weight_matrix(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency; unit weights when unweighted."""
        if self._weights is None:
            return self.adjacency()
        e = self._edges
        w = np.concatenate([self._weights, self._weights])
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sp.csr_matrix((w, (rows, cols)), shape=(self._n, self._n))

    def _check(self, i):
        if not 0 <= i < self._n:
            raise IndexError(f"node index {i} out of range [0, {self._n})")

    def _neighbor_arrays(self):
        if self._nbrs is None:
            adj = self.adjacency()
            self._nbrs = [
                adj.indices[adj.indptr[i]:adj.indptr[i + 1]] for i in range(self._n)
            ]
        return self._nbrs

    def neighbor_array(self, i: int) -> np.ndarray:
        """Sorted neighbor indices of ``i``."""
        self._check(i)
        return self._neighbor_arrays()[i]

    def neighbors(self, i: int) -> set[int]:
        return set(self.neighbor_array(i).tolist())

    def degree(self, i: int) -> int:
        return len(self.neighbor_array(i))

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency().indptr)

    def has_edge(self, i: int, j: int) -> bool:
        self._check(i)
        self._check(j)
        nb = self._neighbor_arrays()[i]
        k = np.searchsorted(nb, j)
        return bool(k < len(nb) and nb[k] == j)

    def edge_weight(self, i: int, j: int) -> float:
        """Weight of edge ``(i, j)``; 1.0 on unweighted graphs."""
        if not self.has_edge(i, j):
            raise KeyError((i, j))
        if self._weights is None:
            return 1.0
        lo, hi = min(i, j), max(i, j)
        k = np.searchsorted(self._edges[:, 0] * self._n + self._edges[:, 1], lo * self._n + hi)
        return float(self._weights[k])

    def density(self) -> float:
        pairs = self._n * (self._n - 1) / 2
        return self.n_edges / pairs if pairs else 0.0

    def subgraph(self, keep) -> "Graph":
        """Induced subgraph on ``keep`` (reindexed in the given order)."""
        keep = np.asarray(keep, dtype=np.int64)
        remap = np.full(self._n, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        e = remap[self._edges]
        mask = (e >= 0).all(axis=1)
        names = None if self._names is None else [self._names[k] for k in keep]
        w = None if self._weights is None else self._weights[mask]
        return Graph(len(keep), e[mask], w, names)

    def without_nodes(self, drop) -> tuple["Graph", np.ndarray]:
        """Remove ``drop``; returns the remaining graph and kept original indices."""
        mask = np.ones(self._n, dtype=bool)
        mask[list(drop)] = False
        keep = np.flatnonzero(mask)
        return self.subgraph(keep), keep

    def unweighted(self) -> "Graph":
        return Graph(self._n, self._edges, None, self._names)


def _open_lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return fh.read().splitlines()
    return [line.rstrip("\n") for line in source]


def load_edge_list(source, weighted: bool = False, nodes: Sequence[str] | None = None) -> Graph:
    """Parse a whitespace-separated edge list.

    ``source`` is a path or an iterable of lines. Node indices follow the
    first appearance of each token unless ``nodes`` fixes the order (every
    token must then be one of ``nodes``). A leading ``# nodes:`` comment, as
    written by :func:`save_edge_list`, declares isolated nodes and the order.
    """
    lines = _open_lines(source)
    index: dict[str, int] = {}
    fixed = nodes is not None
    if fixed:
        index = {str(n): k for k, n in enumerate(nodes)}
        if len(index) != len(nodes):
            raise DataError("duplicate node identifiers")
    pairs, weights = [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(_NODES_DIRECTIVE) and not fixed and not pairs:
                for tok in line[len(_NODES_DIRECTIVE):].split():
                    index.setdefault(tok, len(index))
            continue
        toks = line.split()
        if len(toks) not in (2, 3):
            raise ParseError(f"expected 2 or 3 tokens, got {len(toks)}", lineno)
        if len(toks) == 3 and not weighted:
            raise ParseError("weight token present but weighted=False", lineno)
        if weighted:
            if len(toks) != 3:
                raise ParseError("missing weight", lineno)
            try:
                w = float(toks[2])
            except ValueError:
                raise ParseError(f"bad weight {toks[2]!r}", lineno) from None
            if not np.isfinite(w):
                raise ParseError("non-finite weight", lineno)
            weights.append(w)
        a, b = toks[0], toks[1]
        if a == b:
            raise ParseError(f"self-loop on {a!r}", lineno)
        for tok in (a, b):
            if tok not in index:
                if fixed:
                    raise ParseError(f"unknown node {tok!r}", lineno)
                index[tok] = len(index)
        pairs.append((index[a], index[b]))
    if not index:
        raise DataError("edge list declares no nodes")
    return Graph(len(index), pairs, weights if weighted else None, list(index))


def save_edge_list(g: Graph, dest) -> None:
    """Write ``g`` in the format read by :func:`load_edge_list`."""
    names = g.names()
    out = io.StringIO()
    out.write(_NODES_DIRECTIVE + " " + " ".join(names) + "\n")
    for k, (i, j) in enumerate(g.edges):
        if g.weights is None:
            out.write(f"{names[i]} {names[j]}\n")
        else:
            out.write(f"{names[i]} {names[j]} {float(g.weights[k])!r}\n")
    _write_text(dest, out.getvalue())


def _write_text(dest, text):
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        dest.write(text)


def _read_csv(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    else:
        rows = list(csv.reader(source))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError("empty CSV")
    header, body = rows[0], rows[1:]
    for k, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(r)}", k)
    return header, body


def read_attributes(source):
    """Read an attribute CSV.

    Returns
    -------
    names : list of str
        Node identifiers from the first column.
    columns : list of str
        Attribute column names.
    X : ndarray of shape (N, p)
    """
    header, body = _read_csv(source)
    if len(header) < 2:
        raise DataError("attribute CSV needs an identifier and at least one column")
    names = [r[0] for r in body]
    try:
        X = np.array([[float(v) for v in r[1:]] for r in body], dtype=float)
    except ValueError as exc:
        raise DataError(f"non-numeric attribute value: {exc}") from None
    X = X.reshape(len(body), len(header) - 1)
    if not np.all(np.isfinite(X)):
        raise DataError("attributes must be finite (no missing values)")
    if len(set(names)) != len(names):
        raise DataError("duplicate node identifiers in attribute CSV")
    return names, header[1:], X


def write_attributes(dest, names, columns, X) -> None:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["node", *columns])
    for name, row in zip(names, np.asarray(X, dtype=float)):
        w.writerow([name, *(repr(float(v)) for v in row)])
    _write_text(dest, out.getvalue())


def read_labels(source):
    """Read a label CSV (``node,label``); returns ``(names, labels)``.

    Labels that all parse as integers are returned as ints.
    """
    header, body = _read_csv(source)
    if len(header) < 2:
        raise DataError("label CSV needs an identifier and a label column")
    names = [r[0] for r in body]
    labels = [r[1] for r in body]
    try:
        labels = [int(v) for v in labels]
    except ValueError:
        pass
    return names, labels


def write_labels(dest, names, labels, column="label") -> None:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["node", column])
    for name, lab in zip(names, labels):
        w.writerow([name, lab])
    _write_text(dest, out.getvalue())


def align(names: Sequence[str], target: Sequence[str], values):
    """Reorder ``values`` (one per name in ``names``) to follow ``target``."""
    pos = {n: k for k, n in enumerate(names)}
    missing = [t for t in target if t not in pos]
    if missing:
        raise DataError(f"{len(missing)} node(s) missing, e.g. {missing[0]!r}")
    idx = [pos[t] for t in target]
    if isinstance(values, np.ndarray):
        return values[idx]
    return [values[k] for k in idx]


def correlation_network(raw, threshold: float, node_names=None) -> Graph:
    """Weighted graph linking rows whose Pearson correlation is ``>= threshold``.

    Rows with zero variance are left isolated.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] < 2:
        raise DataError("correlation_network needs at least 2 rows")
    if raw.shape[1] < 2:
        raise DataError("correlation_network needs at least 2 columns")
    if not -1 < threshold < 1:
        raise DataError("threshold must lie in (-1, 1)")
    centered = raw - raw.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered ** 2).sum(axis=1))
    flat = norms <= 1e-12 * np.maximum(1.0, np.abs(raw).max(axis=1))
    if flat.any():
        logger.warning("%d zero-variance row(s) left unconnected", int(flat.sum()))
    ok = ~flat
    z = np.zeros_like(centered)
    z[ok] = centered[ok] / norms[ok, None]
    corr = np.clip(z @ z.T, -1.0, 1.0)
    iu, ju = np.triu_indices(len(raw), k=1)
    c = corr[iu, ju]
    keep = ok[iu] & ok[ju] & (c >= threshold)
    return Graph(len(raw), np.column_stack([iu[keep], ju[keep]]), c[keep], node_names)


def bfs_within(g: Graph, source: int, h: int) -> np.ndarray:
    """Nodes at hop distance 1..h from ``source``."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if dist[u] == h:
            continue
        for v in g.neighbor_array(u):
            v = int(v)
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    del dist[source]
    return np.fromiter(dist, dtype=np.int64, count=len(dist))


def khop_label_counts(g: Graph, labels: Sequence, h: int):
    """Count labels within ``h`` hops of every node (the node itself excluded).

    Returns
    -------
    counts : ndarray of shape (N, C)
    classes : list
        Sorted distinct labels, one per column.
    """
    if len(labels) != g.node_count:
        raise DataError("labels are not aligned with the graph")
    if h < 1:
        raise DataError("h must be >= 1")
    classes = sorted(set(labels))
    col = {c: k for k, c in enumerate(classes)}
    codes = np.array([col[v] for v in labels])
    counts = np.zeros((g.node_count, len(classes)))
    for i in range(g.node_count):
        reach = bfs_within(g, i, h)
        if len(reach):
            counts[i] = np.bincount(codes[reach], minlength=len(classes))
    return counts, classes


def write_partition(dest, names: Iterable[str], partition) -> None:
    write_labels(dest, names, [int(c) for c in partition], column="community")


def read_partition(source):
    names, labels = read_labels(source)
    if not all(isinstance(v, int) for v in labels):
        raise DataError("partition CSV must hold integer community labels")
    return names, np.asarray(labels, dtype=np.int64)
