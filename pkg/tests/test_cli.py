import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from attrsbm.cli import main
from attrsbm.graph import load_edge_list, read_attributes, read_partition
from attrsbm.mimics import data_dir
from attrsbm.synth import SWEEP_HEADER

FAST = ["--restarts", "1", "--max-iter", "50"]


def _files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.name != "metadata.json"}


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "--out", str(out), "--seed", "3", "--n", "60", "--k", "2", "--p-in", "0.3",
                 "--p-out", "0.05", "--dim", "2", "--cov-scale", "0.5"]) == 0
    return out


def test_generate_default_regime(tmp_path):
    out = tmp_path / "g"
    assert main(["generate", "--out", str(out), "--seed", "0"]) == 0
    g = load_edge_list(out / "edges.txt")
    names, cols, X = read_attributes(out / "attributes.csv")
    pnames, part = read_partition(out / "partition.csv")
    assert g.node_count == len(names) == len(pnames) == 200
    assert X.shape == (200, 8) and sorted(set(part.tolist())) == [0, 1, 2, 3]
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["seed"] == 0 and meta["config"]["p_in"] == 0.25 and "duration_seconds" in meta


def test_generate_deterministic(tmp_path):
    args = ["generate", "--seed", "11", "--n", "40", "--k", "2", "--dim", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_generate_empty_graph(tmp_path):
    out = tmp_path / "e"
    assert main(["generate", "--out", str(out), "--seed", "1", "--n", "8", "--k", "2", "--p-in", "0",
                 "--p-out", "0", "--dim", "0"]) == 0
    lines = (out / "edges.txt").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("#")
    assert load_edge_list(out / "edges.txt").node_count == 8


def test_auto_seed_recorded(tmp_path):
    out = tmp_path / "s"
    assert main(["generate", "--out", str(out), "--n", "10", "--k", "2", "--dim", "1"]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert isinstance(meta["seed"], int)


def test_fit_attributed_with_truth(generated, tmp_path):
    out = tmp_path / "fit"
    assert main(["fit", "--out", str(out), "--seed", "0", "--edges", str(generated / "edges.txt"),
                 "--attributes", str(generated / "attributes.csv"), "--k", "2",
                 "--truth", str(generated / "partition.csv")] + FAST) == 0
    doc = json.loads((out / "fit.json").read_text())
    assert doc["mode"] == "attributed" and doc["K"] == 2
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["result"]["nmi_vs_truth"] >= 0.7
    summary = (out / "summary.txt").read_text()
    assert "community sizes" in summary and "iterations" in summary


def test_fit_default_regime_nmi(tmp_path):
    gen = tmp_path / "g"
    main(["generate", "--out", str(gen), "--seed", "2"])
    out = tmp_path / "f"
    assert main(["fit", "--out", str(out), "--seed", "2", "--edges", str(gen / "edges.txt"),
                 "--attributes", str(gen / "attributes.csv"), "--k", "4", "--truth", str(gen / "partition.csv")]) == 0
    assert json.loads((out / "metadata.json").read_text())["result"]["nmi_vs_truth"] >= 0.7


def test_fit_classic_without_attributes(generated, tmp_path):
    out = tmp_path / "c"
    assert main(["fit", "--out", str(out), "--seed", "0", "--edges", str(generated / "edges.txt"),
                 "--k", "2"] + FAST) == 0
    assert json.loads((out / "fit.json").read_text())["mode"] == "classic"
    out2 = tmp_path / "c2"
    assert main(["fit", "--out", str(out2), "--seed", "0", "--edges", str(generated / "edges.txt"),
                 "--k", "2", "--mode", "classic"] + FAST) == 0


def test_fit_k_range_writes_scores(generated, tmp_path):
    out = tmp_path / "kr"
    assert main(["fit", "--out", str(out), "--seed", "0", "--edges", str(generated / "edges.txt"),
                 "--attributes", str(generated / "attributes.csv"), "--k-range", "1:3"] + FAST) == 0
    rows = list(csv.reader((out / "k_scores.csv").open()))
    assert rows[0] == ["K", "icl"] and [r[0] for r in rows[1:]] == ["1", "2", "3"]


def test_fit_deterministic(generated, tmp_path):
    args = ["fit", "--seed", "5", "--edges", str(generated / "edges.txt"),
            "--attributes", str(generated / "attributes.csv"), "--k", "2"] + FAST
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_sweep_single_cell(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--out", str(out), "--seed", "0", "--n", "40", "--k", "2", "--dim", "2",
                 "--mean-degree", "8", "--p-in-grid", "0.3", "--replicates", "10"] + FAST) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER) and len(lines) == 11


def test_linkpred_toy(tmp_path):
    gen = tmp_path / "g"
    main(["generate", "--out", str(gen), "--seed", "4", "--n", "30", "--k", "2", "--p-in", "0.16",
          "--p-out", "0.02", "--dim", "2"])
    g = load_edge_list(gen / "edges.txt")
    assert g.n_edges >= 25
    out = tmp_path / "lp"
    assert main(["linkpred", "--out", str(out), "--seed", "1", "--edges", str(gen / "edges.txt"),
                 "--attributes", str(gen / "attributes.csv"), "--k", "2", "--samples", "1",
                 "--positives", "5", "--negatives", "5", "--protocol", "fast"] + FAST) == 0
    summary = json.loads((out / "linkpred_summary.json").read_text())
    assert all(0.0 <= v <= 1.0 for v in summary["auc"].values())
    assert summary["metadata"]["protocol"] == "fast"
    assert (out / "roc_jaccard.csv").read_text().startswith("fpr,tpr\n")
    assert (out / "linkpred.csv").read_text().startswith("method,sample,i,j,truth,score\n")


def test_collabfilter(generated, tmp_path):
    out = tmp_path / "cf"
    assert main(["collabfilter", "--out", str(out), "--seed", "0", "--edges", str(generated / "edges.txt"),
                 "--attributes", str(generated / "attributes.csv"), "--k", "2"] + FAST) == 0
    assert (out / "collab.csv").read_text().startswith("node,method,relative_error,skip_reason\n")
    summary = json.loads((out / "collab_summary.json").read_text())
    assert set(summary["mean_relative_error"]) == {"attr_sbm", "neighbor_avg", "weighted_avg"}


def test_prep_microbiome(tmp_path):
    out = tmp_path / "prep"
    assert main(["prep", "--out", str(out), "--raw", str(data_dir() / "microbiome_counts.csv"),
                 "--corr-network", "0.7", "--pca", "5", "--standardize"]) == 0
    g = load_edge_list(out / "edges.txt", weighted=True)
    names, cols, X = read_attributes(out / "attributes.csv")
    assert g.node_count == 121 and X.shape == (121, 5)
    assert np.allclose(X.std(axis=0, ddof=1), 1.0)
    assert json.loads((out / "metadata.json").read_text())["result"]["steps"] == ["pca", "standardize"]
    other = tmp_path / "prep2"
    assert main(["prep", "--out", str(other), "--raw", str(data_dir() / "microbiome_counts.csv"),
                 "--pca", "5", "--standardize", "--order", "standardize-first"]) == 0
    assert json.loads((other / "metadata.json").read_text())["result"]["steps"] == ["standardize", "pca"]


def test_prep_khop(tmp_path):
    out = tmp_path / "kh"
    assert main(["prep", "--out", str(out), "--edges", str(data_dir() / "protein_edges.txt"),
                 "--labels", str(data_dir() / "protein_labels.csv"), "--khop-attrs", "4"]) == 0
    names, cols, X = read_attributes(out / "attributes.csv")
    assert X.shape == (82, 6)


def test_eval_identical_and_entropy(generated, tmp_path):
    out = tmp_path / "ev"
    part = str(generated / "partition.csv")
    assert main(["eval", "--out", str(out), "--partition", part, "--reference", part, "--labels", part]) == 0
    doc = json.loads((out / "eval.json").read_text())
    assert doc["nmi"] == 1.0 and doc["entropy"] == [0.0, 0.0]
    assert (out / "entropy.csv").read_text().startswith("community,size,entropy,empty\n")


def test_exit_codes(tmp_path, generated):
    assert main(["fit", "--out", str(tmp_path / "x"), "--edges", str(generated / "edges.txt"),
                 "--attributes", str(generated / "attributes.csv")]) == 2
    assert main(["fit", "--out", str(tmp_path / "x"), "--edges", str(tmp_path / "missing.txt"), "--k", "2"]) == 3
    bad = tmp_path / "bad.txt"
    bad.write_text("a a\n")
    assert main(["fit", "--out", str(tmp_path / "x"), "--edges", str(bad), "--k", "1"]) == 3
    assert main(["fit", "--out", str(tmp_path / "x"), "--edges", str(generated / "edges.txt"), "--k", "999"]) == 2
    assert main(["eval", "--out", str(tmp_path / "x"), "--partition", str(generated / "partition.csv")]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "attrsbm", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
