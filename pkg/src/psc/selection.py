"""Choosing the number of clusters and the subspace dimensions.

Two criteria pick K from a sweep of PSC runs over ``K = 1..k_max``: the
smallest per-point PRESS, and the largest second-order difference (SOD) of
``log W_K``, the mean within-cluster residual. Subspace dimensions are
picked per cluster by the smallest closed-form PRESS over ``R = 1..r_max``.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cluster import PscConfig, Partition, cluster_press, fit_cluster, run_psc
from .errors import (
    AssignmentError,
    ClusteringError,
    DegenerateComponentError,
    SparsityError,
    ValidationError,
)
from .pca import as_data_matrix, reconstruction_error
from .press import CLUSTERING_CLAMP, press_value

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-300


class RankSelection(NamedTuple):
    ranks: list
    press: list  # per cluster, PRESS for R = 1..cap
    capped: list  # per cluster, True when N_k - 2 < r_max


@dataclass
class SelectionReport:
    candidate_ks: list
    press_by_k: list
    wk_by_k: list
    sod_by_k: list  # NaN outside 2..k_max-1
    chosen_k_press: int | None
    chosen_k_sod: int | None
    ranks_by_cluster: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)
    seconds: float = 0.0


def within_cluster_residual(data, partition: Partition, models) -> float:
    """``W_K``: mean over clusters of the mean squared distance to the cluster subspace."""
    X = as_data_matrix(data)
    sizes = partition.sizes
    if np.any(sizes == 0):
        raise ValidationError(f"cluster {int(np.argmin(sizes)) + 1} is empty")
    return float(
        np.mean([reconstruction_error(X[partition.members(c)], m) for c, m in enumerate(models)])
    )


def sod(log_w) -> np.ndarray:
    """``log W_{K-1} + log W_{K+1} - 2 log W_K`` for interior positions; NaN at the ends."""
    lw = np.asarray(log_w, dtype=float)
    out = np.full(lw.shape, np.nan)
    out[1:-1] = lw[:-2] + lw[2:] - 2.0 * lw[1:-1]
    return out


def _first_best(values, ks, pick, slack=0.0):
    vals = np.asarray(values, dtype=float)
    ok = np.flatnonzero(np.isfinite(vals))
    if ok.size == 0:
        return None
    target = pick(vals[ok])
    return ks[ok[np.flatnonzero(np.abs(vals[ok] - target) <= slack)[0]]]


def config_for_k(base: PscConfig, k: int) -> PscConfig:
    """``base`` with ``k`` clusters, the first cluster's settings shared, and seed ``base.seed + k``."""
    return dataclasses.replace(
        base,
        k=k,
        ranks=base.ranks[0],
        gammas=None if base.gammas is None else base.gammas[0],
        nonzeros=None if base.nonzeros is None else base.nonzeros[0],
        seed=base.seed + k,
    )


def select_k(data, k_max: int, base_config: PscConfig, tie_rtol: float = 1e-9) -> SelectionReport:
    """Run PSC for ``K = 1..k_max`` and apply both the PRESS and SOD criteria.

    The PRESS of a fit is ``sum_k N_k J_k / N``. PRESS values within
    ``tie_rtol`` times the largest PRESS of the sweep of the minimum count as
    tied, so exact fits at several K (all at rounding level) resolve to the
    smallest K. A K whose run fails is recorded in ``skipped`` and ignored by
    both criteria.
    """
    X = as_data_matrix(data)
    n = X.shape[0]
    if k_max < 2:
        raise ValidationError("k_max must be at least 2")
    start = time.perf_counter()
    ks = list(range(1, k_max + 1))
    press, wk, skipped, ranks = [], [], [], {}
    for k in ks:
        cfg = config_for_k(base_config, k)
        try:
            res = run_psc(X, cfg)
        except (ClusteringError, ValidationError, SparsityError,
                DegenerateComponentError, AssignmentError) as exc:
            log.info("K=%d skipped: %s", k, exc)
            skipped.append(k)
            press.append(float("nan"))
            wk.append(float("nan"))
            continue
        j = cluster_press(X, res.partition, res.models, cfg.clamp)
        press.append(float(np.dot(res.partition.sizes, j) / n))
        wk.append(within_cluster_residual(X, res.partition, res.models))
        ranks[k] = res.ranks
    log_w = np.log(np.maximum(np.asarray(wk), LOG_FLOOR))
    sods = sod(log_w) if k_max >= 3 else np.full(len(ks), np.nan)
    return SelectionReport(
        candidate_ks=ks,
        press_by_k=press,
        wk_by_k=wk,
        sod_by_k=[float(s) for s in sods],
        chosen_k_press=_first_best(press, ks, np.min, tie_rtol * np.nanmax(press)),
        chosen_k_sod=_first_best(sods, ks, np.max) if k_max >= 3 else None,
        ranks_by_cluster=ranks,
        skipped=skipped,
        seconds=time.perf_counter() - start,
    )


def press_select_k(data, k_max: int, base_config: PscConfig, tie_rtol: float = 1e-9) -> SelectionReport:
    if k_max < 2:
        raise ValidationError("k_max must be at least 2 for the PRESS criterion")
    return select_k(data, k_max, base_config, tie_rtol)


def sod_select(data, k_max: int, base_config: PscConfig) -> SelectionReport:
    if k_max < 3:
        raise ValidationError("k_max must be at least 3 for the SOD criterion")
    return select_k(data, k_max, base_config)


def press_select_ranks(data, partition: Partition, r_max: int, config: PscConfig) -> RankSelection:
    """Per cluster, the dimension in ``1..r_max`` with the smallest closed-form PRESS.

    Clusters with fewer than ``r_max + 2`` members are searched only up to
    ``N_k - 2`` and flagged in ``capped``. Ties go to the smaller dimension.
    """
    X = as_data_matrix(data)
    if r_max < 1:
        raise ValidationError("r_max must be positive")
    ranks, curves, capped = [], [], []
    for c in range(partition.k):
        rows = X[partition.members(c)]
        cap = min(r_max, rows.shape[0] - 2, rows.shape[1])
        if cap < 1:
            raise ClusteringError(f"cluster {c + 1} has {rows.shape[0]} members, too few for any rank")
        curve = [press_value(rows, fit_cluster(rows, r, c, config), CLUSTERING_CLAMP)
                 for r in range(1, cap + 1)]
        ranks.append(int(np.argmin(curve)) + 1)
        curves.append(curve)
        capped.append(cap < r_max)
    return RankSelection(ranks, curves, capped)
