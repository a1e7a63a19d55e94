"""Plain Lloyd K-means, used as the Euclidean comparator in benchmarks."""

from __future__ import annotations

import numpy as np

from .cluster import Partition
from .errors import ValidationError
from .pca import as_data_matrix


def _lloyd(X, centers, max_iter):
    n = X.shape[0]
    k = centers.shape[0]
    index = np.full(n, -1)
    for _ in range(max_iter):
        dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = dist.argmin(axis=1)
        for c in np.flatnonzero(np.bincount(new, minlength=k) == 0):
            # empty cluster: take over the point farthest from its own centre
            far = int(np.argmax(dist[np.arange(n), new]))
            new[far] = c
            dist[far, :] = 0.0
        if np.array_equal(new, index):
            break
        index = new
        centers = np.stack([X[index == c].mean(axis=0) for c in range(k)])
    wcss = float(((X - centers[index]) ** 2).sum())
    return index, wcss


def kmeans_baseline(data, k: int, restarts: int = 10, seed: int = 0, max_iter: int = 300):
    """Best-of-``restarts`` Lloyd K-means. Returns ``(partition, wcss)``."""
    X = as_data_matrix(data)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in 1..{n}")
    if restarts < 1:
        raise ValidationError("restarts must be positive")
    best = None
    for j in range(restarts):
        rng = np.random.default_rng(seed + j)
        centers = X[rng.choice(n, size=k, replace=False)]
        index, wcss = _lloyd(X, centers, max_iter)
        if best is None or wcss < best[1]:
            best = (index, wcss)
    return Partition.from_index(best[0], k), best[1]
