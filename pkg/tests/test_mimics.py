import numpy as np

from attrsbm.graph import correlation_network, khop_label_counts
from attrsbm.mimics import (MICROBIOME_SHAPE, PROTEIN_LABELS, PROTEIN_NODES, load_microbiome, load_protein,
                            microbiome_counts, protein_network, write_bundled)
from attrsbm.stats import pca_project, standardize


def test_bundled_files_match_generators(tmp_path):
    write_bundled(tmp_path)
    for name in ("microbiome_counts.csv", "protein_edges.txt", "protein_labels.csv"):
        from attrsbm.mimics import data_dir
        assert (tmp_path / name).read_bytes() == (data_dir() / name).read_bytes()


def test_microbiome_pipeline_shapes():
    names, columns, counts = load_microbiome()
    assert counts.shape == MICROBIOME_SHAPE == (121, 130)
    assert np.all(counts >= 0) and np.all(counts == np.round(counts))
    g = correlation_network(counts, 0.7, names)
    assert g.node_count == 121 and g.is_weighted and np.all(g.weights >= 0.7)
    X = standardize(pca_project(counts, 5))
    assert X.shape == (121, 5)
    assert np.allclose(X.mean(axis=0), 0, atol=1e-12) and np.allclose(X.std(axis=0, ddof=1), 1)


def test_protein_pipeline_shapes():
    g, names, labels = load_protein()
    assert g.node_count == PROTEIN_NODES == 82
    assert sorted(set(labels)) == list(PROTEIN_LABELS)
    X, classes = khop_label_counts(g, labels, 4)
    assert X.shape == (82, 6) and classes == sorted(PROTEIN_LABELS)
    assert np.all(X.sum(axis=1) <= 81)


def test_generators_deterministic():
    assert np.array_equal(microbiome_counts()[2], microbiome_counts()[2])
    assert protein_network()[0] == protein_network()[0]
