"""Dense and sparse PCA fits for a single cluster of observations.

Every fit centres its own rows and keeps the column means, so a fitted
:class:`SubspaceModel` can later score arbitrary observations ``x`` through
``x - model.mean``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import RankError, SparsityError, ValidationError


def as_data_matrix(data) -> np.ndarray:
    """Validate ``data`` as a finite N x P float matrix and return it as an array."""
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got {X.ndim} dimensions")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValidationError(f"data matrix must be at least 1x1, got {X.shape}")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise ValidationError(f"non-finite entry at row {bad[0]}, column {bad[1]}")
    return X


def center(data):
    """Subtract column means. Returns ``(centred, mean)``."""
    X = as_data_matrix(data)
    mean = X.mean(axis=0)
    return X - mean, mean


class SvdTriplets(NamedTuple):
    left: np.ndarray
    singular: np.ndarray
    right: np.ndarray


class CardinalityGamma(NamedTuple):
    gamma: float
    exact: bool


@dataclass(frozen=True, eq=False)
class SubspaceModel:
    """PCA parameters of one cluster.

    ``scores`` are the projections of the fitted (centred) rows on the
    unit-norm loadings and ``score_norms[r]`` is the squared norm of score
    column ``r``; leverages are ``scores**2 / score_norms``.
    """

    mean: np.ndarray
    loadings: np.ndarray
    scores: np.ndarray
    score_norms: np.ndarray
    rank: int
    sparse: bool = False
    gamma: tuple = ()

    @property
    def n_fitted(self) -> int:
        return self.scores.shape[0]

    def support(self, atol: float = 0.0) -> list[np.ndarray]:
        """Indices of the nonzero entries of each loading column."""
        return [np.flatnonzero(np.abs(col) > atol) for col in self.loadings.T]


def _fix_signs(right, left=None):
    # largest-magnitude entry of each right vector made positive; argmax picks the first on ties
    idx = np.argmax(np.abs(right), axis=0)
    signs = np.sign(right[idx, np.arange(right.shape[1])])
    signs[signs == 0] = 1.0
    right = right * signs
    if left is not None:
        left = left * signs
    return right, left


def leading_svd(data, r: int) -> SvdTriplets:
    """Top-``r`` singular triplets of ``data`` (no centring)."""
    X = as_data_matrix(data)
    if not 1 <= r <= min(X.shape):
        raise RankError(f"rank {r} outside 1..{min(X.shape)} for a {X.shape[0]}x{X.shape[1]} matrix")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    right, left = _fix_signs(Vt[:r].T, U[:, :r])
    return SvdTriplets(left=left, singular=s[:r], right=right)


def _check_rank(X, r):
    n, p = X.shape
    if n < 2:
        raise RankError("PCA needs at least two observations")
    if not 1 <= r <= min(n - 1, p):
        raise RankError(f"rank {r} outside 1..{min(n - 1, p)} for {n} observations in {p} variables")


def _model(mean, loadings, Xc, sparse, gamma):
    scores = Xc @ loadings
    return SubspaceModel(
        mean=mean,
        loadings=loadings,
        scores=scores,
        score_norms=np.einsum("ij,ij->j", scores, scores),
        rank=loadings.shape[1],
        sparse=sparse,
        gamma=tuple(float(g) for g in gamma),
    )


def fit_pca(data, r: int) -> SubspaceModel:
    """Fit an ``r``-component PCA model to centred ``data`` via the SVD."""
    X = as_data_matrix(data)
    _check_rank(X, r)
    Xc, mean = center(X)
    svd = leading_svd(Xc, r)
    return _model(mean, svd.right, Xc, sparse=False, gamma=(0.0,) * r)


def soft_threshold(a, gamma):
    """``sgn(a) * max(|a| - gamma, 0)``, elementwise."""
    if np.any(np.asarray(gamma) < 0):
        raise ValidationError("gamma must be nonnegative")
    a = np.asarray(a, dtype=float)
    out = np.sign(a) * np.maximum(np.abs(a) - gamma, 0.0)
    return out if out.ndim else float(out)


def gamma_for_cardinality(data, component_u, target_nonzeros: int) -> CardinalityGamma:
    """Threshold that keeps ``target_nonzeros`` entries of ``soft(X^T u, gamma)``.

    Returns the ``(target+1)``-th largest ``|X^T u|``. When a tie straddles
    the cut no threshold keeps exactly ``target`` entries; the next distinct
    value below the tie is returned instead (keeping slightly more) and
    ``exact`` is False.
    """
    X = as_data_matrix(data)
    u = np.asarray(component_u, dtype=float).ravel()
    p = X.shape[1]
    if not 1 <= target_nonzeros <= p:
        raise ValidationError(f"target_nonzeros must lie in 1..{p}, got {target_nonzeros}")
    a = np.sort(np.abs(X.T @ u))[::-1]
    if target_nonzeros == p:
        return CardinalityGamma(0.0, True)
    cut = a[target_nonzeros]
    if a[target_nonzeros - 1] > cut:
        return CardinalityGamma(float(cut), True)
    below = a[a < a[target_nonzeros - 1]]
    return CardinalityGamma(float(below[0]) if below.size else 0.0, False)


def fit_sparse_pca(
    data,
    r: int,
    gamma: float | None = 0.0,
    *,
    nonzeros: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> SubspaceModel:
    """Sparse PCA by alternating soft thresholding with rank-one deflation.

    Each component starts from the leading singular triplet of the current
    (deflated) matrix with ``v = sigma * v1``, alternates
    ``v <- soft(X^T u, gamma)`` and ``u <- Xv / ||Xv||`` until ``v`` moves
    less than ``tol``, and deflates ``X <- X - u v^T`` with the unnormalised
    ``v``. Stored loadings are rescaled to unit norm. Components are not
    re-orthogonalised.

    Pass ``nonzeros`` instead of ``gamma`` to re-pick the threshold at every
    update so that each loading keeps that many entries (more only when ties
    straddle the cut). A ``gamma`` given directly is held fixed.
    """
    X = as_data_matrix(data)
    _check_rank(X, r)
    if nonzeros is None and (gamma is None or gamma < 0):
        raise ValidationError("gamma must be a nonnegative number when nonzeros is not given")
    Xc, mean = center(X)
    work = Xc.copy()
    loadings = np.zeros((X.shape[1], r))
    gammas = []
    for comp in range(r):
        u, s, v1 = leading_svd(work, 1)
        u = u[:, 0]
        g = gamma
        v = s[0] * v1[:, 0]
        for _ in range(max_iter):
            if nonzeros is not None:
                g = gamma_for_cardinality(work, u, nonzeros).gamma
            v_new = soft_threshold(work.T @ u, g)
            if not np.any(v_new):
                raise SparsityError(comp, g)
            xv = work @ v_new
            u = xv / np.linalg.norm(xv)
            step = np.linalg.norm(v_new - v)
            v = v_new
            if step < tol:
                break
        work -= np.outer(u, v)
        loadings[:, comp] = v / np.linalg.norm(v)
        gammas.append(g)
    loadings, _ = _fix_signs(loadings)
    return _model(mean, loadings, Xc, sparse=True, gamma=gammas)


def reconstruction_error(data, model: SubspaceModel) -> float:
    """Mean squared reconstruction error ``(1/N) sum ||x_i - x_i sum_r v_r v_r^T||^2``."""
    Xc = as_data_matrix(data) - model.mean
    resid = Xc - (Xc @ model.loadings) @ model.loadings.T
    return float(np.einsum("ij,ij->", resid, resid) / Xc.shape[0])
