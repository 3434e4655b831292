"""Synthetic stand-ins shaped like the two biological case studies.

The real tables are external downloads; these mimics have the same
dimensions so the preparation pipelines can be exercised end to end:

* a subject-by-OTU count table, 121 rows x 130 columns;
* a connected 82-node interaction network with one of 6 labels per node.

Bundled copies live in ``attrsbm/data``; :func:`write_bundled` regenerates them.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .graph import Graph, load_edge_list, read_attributes, read_labels, save_edge_list, write_attributes, write_labels

MICROBIOME_SHAPE = (121, 130)
PROTEIN_NODES = 82
PROTEIN_LABELS = ("acet_down", "acet_up", "phos_down", "phos_up", "ubiq_down", "ubiq_up")


def microbiome_counts(seed: int = 7):
    """Counts with four subject groups, each sharing a heavy-tailed OTU profile."""
    rng = np.random.default_rng(seed)
    n, p = MICROBIOME_SHAPE
    groups = rng.permutation(np.arange(n) % 4)
    shared = rng.lognormal(0.0, 1.5, size=p)
    profiles = shared * rng.lognormal(0.0, 0.6, size=(4, p))
    profiles /= profiles.sum(axis=1, keepdims=True)
    depth = rng.integers(8_000, 20_000, size=n)
    rates = profiles[groups] * rng.lognormal(0.0, 0.35, size=(n, p))
    rates /= rates.sum(axis=1, keepdims=True)
    counts = rng.poisson(rates * depth[:, None]).astype(float)
    names = [f"subject{i:03d}" for i in range(n)]
    columns = [f"otu{k:03d}" for k in range(p)]
    return names, columns, counts


def protein_network(seed: int = 11):
    """Sparse connected planted-partition graph with block-correlated labels."""
    rng = np.random.default_rng(seed)
    n = PROTEIN_NODES
    blocks = rng.permutation(np.arange(n) % 6)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(blocks[iu] == blocks[ju], 0.18, 0.012)
    hit = rng.random(len(iu)) < prob
    edges = list(zip(iu[hit].tolist(), ju[hit].tolist()))
    # attach every stray component to the largest one
    k, comp = connected_components(Graph(n, edges).adjacency(), directed=False)
    giant = np.flatnonzero(comp == np.argmax(np.bincount(comp)))
    for c in range(k):
        members = np.flatnonzero(comp == c)
        if members[0] not in giant:
            edges.append((int(rng.choice(members)), int(rng.choice(giant))))
    g = Graph(n, edges, node_names=[f"prot{i:02d}" for i in range(n)])
    flip = rng.random(n) < 0.25
    labels = np.where(flip, rng.integers(0, 6, size=n), blocks)
    return g, [PROTEIN_LABELS[c] for c in labels]


def data_dir() -> Path:
    return Path(str(resources.files("attrsbm") / "data"))


def load_microbiome():
    return read_attributes(data_dir() / "microbiome_counts.csv")


def load_protein():
    g = load_edge_list(data_dir() / "protein_edges.txt")
    names, labels = read_labels(data_dir() / "protein_labels.csv")
    return g, names, labels


def write_bundled(directory=None):
    directory = Path(directory) if directory is not None else data_dir()
    directory.mkdir(parents=True, exist_ok=True)
    names, columns, counts = microbiome_counts()
    write_attributes(directory / "microbiome_counts.csv", names, columns, counts)
    g, labels = protein_network()
    save_edge_list(g, directory / "protein_edges.txt")
    write_labels(directory / "protein_labels.csv", g.names(), labels)


if __name__ == "__main__":
    write_bundled()
