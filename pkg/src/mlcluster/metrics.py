"""Agreement scores between two partitions: Purity, NMI and adjusted Rand.

All three are computed from the contingency table of predicted versus true
labels, so they ignore how cluster ids are numbered.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import comb


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # (k_pred, k_true)
    n: int


def contingency(pred, truth):
    """Contingency table over the distinct labels of each partition."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predicted vs {truth.size} true labels")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    counts = np.zeros((p.max(initial=-1) + 1, t.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(counts, (p, t), 1)
    return ContingencyTable(counts, int(pred.size))


def purity(pred, truth):
    """Fraction of items that fall in their predicted cluster's majority class.

    Not symmetric: splitting predicted clusters can only increase purity.
    """
    table = contingency(pred, truth)
    if table.n == 0:
        raise ValueError("empty partitions")
    return float(table.counts.max(axis=1).sum() / table.n)


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth):
    """Mutual information normalized by the arithmetic mean of the two entropies.

    Natural logarithm. Two single-cluster partitions score 1 by convention.
    """
    table = contingency(pred, truth)
    c, n = table.counts, table.n
    if n == 0:
        raise ValueError("empty partitions")
    h_pred = _entropy(c.sum(axis=1), n)
    h_true = _entropy(c.sum(axis=0), n)
    if h_pred == 0 and h_true == 0:
        return 1.0
    rows = c.sum(axis=1, keepdims=True)
    cols = c.sum(axis=0, keepdims=True)
    nz = c > 0
    mi = float(np.sum(c[nz] / n * np.log(c[nz] * n / (rows * cols)[nz])))
    denom = 0.5 * (h_pred + h_true)
    return float(min(max(mi / denom, 0.0), 1.0))


def adjusted_rand(pred, truth):
    """Hubert-Arabie adjusted Rand index.

    When the index is undefined (max equals expected, e.g. both partitions
    trivial) it is 1 for identical partitions and 0 otherwise.
    """
    table = contingency(pred, truth)
    c, n = table.counts, table.n
    if n == 0:
        raise ValueError("empty partitions")
    index = comb(c, 2).sum()
    a = comb(c.sum(axis=1), 2).sum()
    b = comb(c.sum(axis=0), 2).sum()
    total = comb(n, 2)
    expected = a * b / total if total > 0 else 0.0
    maximum = 0.5 * (a + b)
    if maximum == expected:
        same = c.shape[0] == c.shape[1] and np.count_nonzero(c) == c.shape[0]
        return 1.0 if same else 0.0
    return float((index - expected) / (maximum - expected))


def metrics_report(pred, truth):
    """Dictionary ``{purity, nmi, ari, n, k_pred, k_true}``."""
    table = contingency(pred, truth)
    return {
        "purity": purity(pred, truth),
        "nmi": nmi(pred, truth),
        "ari": adjusted_rand(pred, truth),
        "n": table.n,
        "k_pred": int(table.counts.shape[0]),
        "k_true": int(table.counts.shape[1]),
    }
