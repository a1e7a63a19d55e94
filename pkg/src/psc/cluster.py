"""Predictive subspace clustering.

Each restart draws a random partition and alternates two steps: assign every
point to the cluster whose PCA model gives it the smallest squared
predictive influence, then refit each cluster's (optionally sparse) PCA
model. The loop stops when the summed cluster PRESS stops moving, when no
label changes, or after ``max_iter`` iterations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssignmentError,
    ClusteringError,
    DegenerateComponentError,
    SparsityError,
    ValidationError,
)
from .pca import SubspaceModel, as_data_matrix, fit_pca, fit_sparse_pca
from .press import CLUSTERING_CLAMP, influence_magnitude, press_value

log = logging.getLogger(__name__)

MAX_INIT_DRAWS = 1000


def _per_cluster(value, k, name, cast):
    if value is None:
        return None
    if np.isscalar(value):
        return (cast(value),) * k
    value = tuple(cast(v) for v in value)
    if len(value) != k:
        raise ValidationError(f"{name} has {len(value)} entries, expected {k}")
    return value


@dataclass(frozen=True)
class PscConfig:
    """Inputs of a clustering run.

    ``ranks``, ``gammas`` and ``nonzeros`` accept a scalar (shared by every
    cluster) or one value per cluster. Give at most one of ``gammas`` and
    ``nonzeros``. ``tol=None`` means ``1e-6`` times the summed PRESS of the
    initial partition. ``r_max`` turns on the per-iteration PRESS search over
    subspace dimensions ``1..r_max``; ``ranks`` is then only used for the
    size checks of the initial partition.
    """

    k: int
    ranks: tuple = 1
    gammas: tuple | None = None
    nonzeros: tuple | None = None
    tol: float | None = None
    max_iter: int = 100
    restarts: int = 10
    seed: int = 0
    clamp_leverage: bool = True
    r_max: int | None = None
    sparse_tol: float = 1e-10
    sparse_max_iter: int = 1000

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be positive")
        object.__setattr__(self, "ranks", _per_cluster(self.ranks, self.k, "ranks", int))
        object.__setattr__(self, "gammas", _per_cluster(self.gammas, self.k, "gammas", float))
        object.__setattr__(self, "nonzeros", _per_cluster(self.nonzeros, self.k, "nonzeros", int))
        if min(self.ranks) < 1:
            raise ValidationError("every rank must be at least 1")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValidationError("restarts and max_iter must be positive")
        if self.gammas is not None and self.nonzeros is not None:
            raise ValidationError("give either gammas or nonzeros, not both")
        if self.gammas is not None and min(self.gammas) < 0:
            raise ValidationError("gammas must be nonnegative")
        if self.nonzeros is not None and min(self.nonzeros) < 1:
            raise ValidationError("nonzeros must be positive")
        if self.r_max is not None and self.r_max < 1:
            raise ValidationError("r_max must be positive")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")

    @property
    def clamp(self):
        return CLUSTERING_CLAMP if self.clamp_leverage else None

    def min_sizes(self) -> np.ndarray:
        return np.array(self.ranks) + 2


@dataclass(frozen=True, eq=False)
class Partition:
    labels: np.ndarray  # 1..k
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValidationError("labels must be a nonempty vector")
        if labels.min() < 1 or labels.max() > self.k:
            raise ValidationError(f"labels must lie in 1..{self.k}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_index(cls, index, k):
        return cls(np.asarray(index) + 1, k)

    @property
    def index(self) -> np.ndarray:
        return self.labels - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.index, minlength=self.k)

    def members(self, cluster: int) -> np.ndarray:
        """Row indices of 0-based ``cluster``."""
        return np.flatnonzero(self.labels == cluster + 1)


@dataclass(frozen=True, eq=False)
class PscResult:
    partition: Partition
    models: list
    objective_trace: list
    press_trace: list
    iterations: int
    converged: bool
    restart_index: int
    assignment_trace: list = field(default_factory=list)
    repairs: int = 0

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def labels(self) -> np.ndarray:
        return self.partition.labels

    @property
    def ranks(self) -> list[int]:
        return [m.rank for m in self.models]


def fit_cluster(rows, rank: int, cluster: int, config: PscConfig) -> SubspaceModel:
    """Fit cluster ``cluster`` (0-based) with the dense or sparse method ``config`` asks for."""
    if config.nonzeros is not None:
        return fit_sparse_pca(
            rows, rank, None, nonzeros=config.nonzeros[cluster],
            tol=config.sparse_tol, max_iter=config.sparse_max_iter,
        )
    if config.gammas is not None and config.gammas[cluster] > 0:
        return fit_sparse_pca(
            rows, rank, config.gammas[cluster],
            tol=config.sparse_tol, max_iter=config.sparse_max_iter,
        )
    return fit_pca(rows, rank)


def influence_matrix(data, models, clamp=CLUSTERING_CLAMP) -> np.ndarray:
    """N x K matrix of squared predictive influences."""
    X = as_data_matrix(data)
    out = np.column_stack([influence_magnitude(X, m, clamp) for m in models])
    return np.where(np.isfinite(out), out, np.inf)


def _argmin_labels(mags):
    bad = np.flatnonzero(~np.isfinite(mags).any(axis=1))
    if bad.size:
        raise AssignmentError(int(bad[0]))
    return np.argmin(mags, axis=1)


def assign(data, models, clamp=CLUSTERING_CLAMP) -> Partition:
    """Give each point to the model under which its influence is smallest (ties: lowest index)."""
    if len(models) == 0:
        raise ValidationError("need at least one model")
    mags = influence_matrix(data, models, clamp)
    return Partition.from_index(_argmin_labels(mags), len(models))


def refit(data, partition: Partition, config: PscConfig) -> list[SubspaceModel]:
    """Refit every cluster's model on its current members."""
    X = as_data_matrix(data)
    sizes = partition.sizes
    small = np.flatnonzero(sizes < config.min_sizes())
    if small.size:
        c = small[0]
        raise ClusteringError(
            f"cluster {c + 1} has {sizes[c]} members, needs {config.min_sizes()[c]}"
        )
    if config.r_max is not None:
        from .selection import press_select_ranks

        ranks = press_select_ranks(X, partition, config.r_max, config).ranks
    else:
        ranks = config.ranks
    return [fit_cluster(X[partition.members(c)], ranks[c], c, config) for c in range(config.k)]


def objective(data, partition: Partition, models, clamp=CLUSTERING_CLAMP) -> float:
    """Sum over clusters of the squared influence of each member under its own model."""
    mags = influence_matrix(data, models, clamp)
    return float(mags[np.arange(mags.shape[0]), partition.index].sum())


def cluster_press(data, partition: Partition, models, clamp=CLUSTERING_CLAMP) -> np.ndarray:
    """Closed-form PRESS of each cluster under its own model."""
    X = as_data_matrix(data)
    return np.array(
        [press_value(X[partition.members(c)], m, clamp) for c, m in enumerate(models)]
    )


def random_partition(n, config: PscConfig, rng) -> Partition:
    """Uniform random labels, redrawn until every cluster is large enough to fit."""
    need = config.min_sizes()
    for _ in range(MAX_INIT_DRAWS):
        index = rng.integers(0, config.k, size=n)
        if np.all(np.bincount(index, minlength=config.k) >= need):
            return Partition.from_index(index, config.k)
    raise ClusteringError(f"no admissible random partition of {n} points in {MAX_INIT_DRAWS} draws")


def _repair(index, mags, config: PscConfig):
    """Refill clusters that fell below their minimum size.

    An undersized cluster receives the points with the largest influence
    under their currently best model, taken only from clusters that stay
    large enough. Returns ``None`` if that is impossible.
    """
    n, k = mags.shape
    need = config.min_sizes()
    index = index.copy()
    sizes = np.bincount(index, minlength=k)
    if np.all(sizes >= need):
        return index
    worst = mags[np.arange(n), index]
    order = np.argsort(-worst, kind="stable")
    quota = math.ceil(n / (10 * k))
    for c in np.flatnonzero(sizes < need):
        take = max(quota, need[c] - sizes[c])
        for i in order:
            if take == 0:
                break
            donor = index[i]
            if donor == c or sizes[donor] - 1 < need[donor]:
                continue
            index[i] = c
            sizes[donor] -= 1
            sizes[c] += 1
            take -= 1
        if sizes[c] < need[c]:
            return None
    return index


def _single_run(X, config: PscConfig, initial: Partition, restart: int) -> PscResult:
    clamp = config.clamp
    n = X.shape[0]
    rows = np.arange(n)
    partition = initial
    models = refit(X, partition, config)
    mags = influence_matrix(X, models, clamp)
    obj = float(mags[rows, partition.index].sum())
    press = float(cluster_press(X, partition, models, clamp).sum())
    tol = config.tol if config.tol is not None else 1e-6 * press
    objective_trace, press_trace, assignment_trace = [obj], [press], []
    converged = False
    repairs = failures = 0
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        index = _argmin_labels(mags)
        assignment_trace.append(float(mags[rows, index].sum()))
        if np.array_equal(index, partition.index):
            converged = True
            break
        repaired = _repair(index, mags, config)
        if repaired is None:
            failures += 1
            if failures >= 2:
                raise ClusteringError(f"restart {restart}: cluster repair failed twice in a row")
            continue
        failures = 0
        if not np.array_equal(repaired, index):
            repairs += 1
        partition = Partition.from_index(repaired, config.k)
        models = refit(X, partition, config)
        mags = influence_matrix(X, models, clamp)
        obj = float(mags[rows, partition.index].sum())
        new_press = float(cluster_press(X, partition, models, clamp).sum())
        objective_trace.append(obj)
        press_trace.append(new_press)
        if abs(new_press - press) < tol:
            converged = True
            break
        press = new_press
    return PscResult(
        partition=partition,
        models=models,
        objective_trace=objective_trace,
        press_trace=press_trace,
        iterations=iterations,
        converged=converged,
        restart_index=restart,
        assignment_trace=assignment_trace,
        repairs=repairs,
    )


def run_psc(data, config: PscConfig, initial: Partition | None = None) -> PscResult:
    """Cluster ``data`` with the best of ``config.restarts`` random starts.

    Restart ``j`` draws its initial partition from a generator seeded with
    ``config.seed + j``; the result with the smallest final objective wins,
    ties going to the earlier restart. Passing ``initial`` runs a single
    restart from that partition instead.
    """
    X = as_data_matrix(data)
    n = X.shape[0]
    if n < int(config.min_sizes().sum()):
        raise ValidationError(
            f"{n} observations cannot fill {config.k} clusters of minimum sizes {config.min_sizes().tolist()}"
        )
    if config.k == 1:
        part = Partition(np.ones(n, dtype=np.int64), 1)
        models = refit(X, part, config)
        obj = objective(X, part, models, config.clamp)
        press = float(cluster_press(X, part, models, config.clamp).sum())
        return PscResult(part, models, [obj], [press], 1, True, 0, [obj])

    if initial is not None:
        if initial.k != config.k or initial.labels.size != n:
            raise ValidationError("initial partition does not match data and config")
        starts = [(0, initial)]
    else:
        starts = [
            (j, random_partition(n, config, np.random.default_rng(config.seed + j)))
            for j in range(config.restarts)
        ]
    best = None
    errors = []
    for j, init in starts:
        try:
            res = _single_run(X, config, init, j)
        except (ClusteringError, SparsityError, DegenerateComponentError, AssignmentError) as exc:
            log.debug("restart %d failed: %s", j, exc)
            errors.append(exc)
            continue
        if best is None or res.objective < best.objective:
            best = res
    if best is None:
        raise ClusteringError(f"all {len(starts)} restarts failed; last error: {errors[-1]}")
    return best
