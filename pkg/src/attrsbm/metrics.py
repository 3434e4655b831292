"""Partition comparison, label entropy and ROC analysis."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError

NMI_NORMALIZATIONS = ("arithmetic", "geometric", "max", "min")


def _entropy(counts) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p))) + 0.0  # no negative zero


def contingency(a, b) -> np.ndarray:
    _, ia = np.unique(np.asarray(a), return_inverse=True)
    _, ib = np.unique(np.asarray(b), return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia.ravel(), ib.ravel()), 1.0)
    return table


def nmi(p1, p2, normalization: str = "arithmetic") -> float:
    """Normalized mutual information (natural logs).

    Two single-community partitions score 1; a single-community partition
    against a non-trivial one scores 0.
    """
    if len(p1) != len(p2):
        raise DataError("partitions have different lengths")
    if normalization not in NMI_NORMALIZATIONS:
        raise DataError(f"unknown normalization {normalization!r}")
    if len(p1) == 0:
        raise DataError("empty partitions")
    table = contingency(p1, p2)
    h1, h2 = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if h1 == 0 and h2 == 0:
        return 1.0
    if h1 == 0 or h2 == 0:
        return 0.0
    n = table.sum()
    pij = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / n**2
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    norm = {"arithmetic": (h1 + h2) / 2, "geometric": np.sqrt(h1 * h2),
            "max": max(h1, h2), "min": min(h1, h2)}[normalization]
    return float(np.clip(mi / norm, 0.0, 1.0))


def community_entropy(partition, labels, K: int | None = None):
    """Entropy of the label distribution inside each community.

    Returns ``(entropies, empty)``; ``empty[c]`` flags communities with no
    members, whose entropy is reported as 0.
    """
    partition = np.asarray(partition, dtype=np.int64)
    if len(partition) != len(labels):
        raise DataError("partition and labels have different lengths")
    K = int(partition.max()) + 1 if K is None else K
    _, codes = np.unique(np.asarray(labels), return_inverse=True)
    codes = codes.ravel()
    ent = np.zeros(K)
    empty = np.zeros(K, dtype=bool)
    for c in range(K):
        members = codes[partition == c]
        if len(members) == 0:
            empty[c] = True
            continue
        ent[c] = _entropy(np.bincount(members).astype(float))
    return ent, empty


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for f, t in self.points:
            w.writerow([repr(f), repr(t)])
        return out.getvalue()


def roc_auc(scores, truth=None) -> RocCurve:
    """ROC curve and rank-based AUC (ties count one half).

    Accepts either a sequence of ``(score, flag)`` pairs or two parallel
    sequences.
    """
    if truth is None:
        pairs = list(scores)
        scores = [s for s, _ in pairs]
        truth = [t for _, t in pairs]
    s = np.asarray(scores, dtype=float)
    y = np.asarray(truth, dtype=bool)
    if len(s) != len(y):
        raise DataError("scores and truth flags differ in length")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs at least one positive and one negative")
    ranks = rankdata(s)
    auc = (ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s) - 1]
    tp = np.cumsum(y_sorted)[last_of_group]
    fp = np.cumsum(~y_sorted)[last_of_group]
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    return RocCurve(fpr, tpr, float(auc))
