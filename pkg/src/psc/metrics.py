"""Clustering accuracy, adjusted Rand index and Monte Carlo summaries."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError


class ContingencyTable(NamedTuple):
    counts: np.ndarray
    true_classes: np.ndarray
    pred_classes: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def contingency(true_labels, pred_labels) -> ContingencyTable:
    t = np.asarray(true_labels).ravel()
    p = np.asarray(pred_labels).ravel()
    if t.shape != p.shape:
        raise ValidationError(f"label vectors differ in length: {t.size} vs {p.size}")
    if t.size == 0:
        raise ValidationError("label vectors are empty")
    tc, ti = np.unique(t, return_inverse=True)
    pc, pi = np.unique(p, return_inverse=True)
    counts = np.zeros((tc.size, pc.size), dtype=np.int64)
    np.add.at(counts, (ti, pi), 1)
    return ContingencyTable(counts, tc, pc)


def accuracy(true_labels, pred_labels) -> float:
    """Best fraction of agreements over one-to-one matchings of cluster labels."""
    table = contingency(true_labels, pred_labels)
    rows, cols = linear_sum_assignment(table.counts, maximize=True)
    return float(table.counts[rows, cols].sum() / table.n)


def _pairs(x) -> int:
    x = np.asarray(x, dtype=np.int64)
    return int(np.sum(x * (x - 1) // 2))


def ari(true_labels, pred_labels) -> float:
    """Adjusted Rand index (pair counting, expectation-adjusted).

    Pair counts are kept as Python integers and combined in a single
    division, so small instances give exact rationals.
    """
    table = contingency(true_labels, pred_labels)
    n = table.n
    if n < 2:
        raise ValidationError("ARI needs at least two observations")
    index = _pairs(table.counts)
    a = _pairs(table.row_sums)
    b = _pairs(table.col_sums)
    total = n * (n - 1) // 2
    # (index - a b / T) / ((a + b) / 2 - a b / T), scaled by 2T
    num = 2 * (index * total - a * b)
    den = (a + b) * total - 2 * a * b
    if den == 0:
        # both partitions trivial (all-in-one or all singletons) and identical in shape
        return 1.0
    return num / den


def monte_carlo(scores) -> tuple[float, float]:
    """Sample mean and sample standard deviation (ddof=1) of per-run scores."""
    s = np.asarray(scores, dtype=float).ravel()
    if s.size < 2:
        raise ValidationError("need at least two runs to summarise")
    return float(s.mean()), float(s.std(ddof=1))
