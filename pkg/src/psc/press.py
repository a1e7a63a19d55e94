"""Leverages, closed-form PCA PRESS and predictive influence.

All quantities are evaluated on data centred by the model's own mean. For
observations the model was not fitted on, leverages use the stored score
norms, ``h = d**2 / score_norms``, which can exceed one; pass ``clamp`` to
cap them instead of raising :class:`LeverageSingularityError`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import DegenerateComponentError, LeverageSingularityError, ValidationError
from .pca import SubspaceModel, _check_rank, as_data_matrix

SINGULAR_LEVERAGE = 1.0 - 1e-12
CLUSTERING_CLAMP = 1.0 - 1e-8


@dataclass(frozen=True, eq=False)
class PressReport:
    residuals: np.ndarray  # N x R x P, e_i^(r)
    leverages: np.ndarray  # N x R
    loo_errors: np.ndarray  # N x P
    press: float


@dataclass(frozen=True, eq=False)
class Influence:
    """Predictive influence vectors (rows of ``values``) and their squared norms."""

    values: np.ndarray
    magnitude: np.ndarray


def leverages(model: SubspaceModel) -> np.ndarray:
    """``h_i^(r) = d_i^(r)**2 / sum_j d_j^(r)**2`` for the fitted observations."""
    _check_norms(model)
    return model.scores**2 / model.score_norms


def _check_norms(model):
    bad = np.flatnonzero(model.score_norms <= 0)
    if bad.size:
        raise DegenerateComponentError(f"component {bad[0]} has zero score norm")


def _project(data, model, clamp):
    X = as_data_matrix(data)
    if X.shape[1] != model.loadings.shape[0]:
        raise ValidationError(
            f"data has {X.shape[1]} variables, model expects {model.loadings.shape[0]}"
        )
    Xc = X - model.mean
    _check_norms(model)
    d = Xc @ model.loadings
    h = d**2 / model.score_norms
    if clamp is None:
        hit = np.argwhere(h >= SINGULAR_LEVERAGE)
        if hit.size:
            i, r = hit[0]
            raise LeverageSingularityError(int(i), int(r), float(h[i, r]))
    else:
        h = np.minimum(h, clamp)
    return Xc, d, h


def _loo(Xc, d, h, V):
    # sum_r (x - d_r v_r^T)/(1-h_r) - (R-1) x, without forming the N x R x P residuals
    w = 1.0 / (1.0 - h)
    scale = w.sum(axis=1) - (V.shape[1] - 1)
    return Xc * scale[:, None] - (d * w) @ V.T, w, scale


def press_closed_form(data, model: SubspaceModel, clamp: float | None = None) -> PressReport:
    """Approximate leave-one-out PRESS from a single fit.

    ``J = (1/N) sum_i || sum_r e_i^(r) / (1 - h_i^(r)) - (R - 1) x_i ||^2``.
    """
    Xc, d, h = _project(data, model, clamp)
    V = model.loadings
    residuals = Xc[:, None, :] - d[:, :, None] * V.T[None, :, :]
    loo, _, _ = _loo(Xc, d, h, V)
    press = float(np.einsum("ij,ij->", loo, loo) / Xc.shape[0])
    return PressReport(residuals=residuals, leverages=h, loo_errors=loo, press=press)


def press_value(data, model: SubspaceModel, clamp: float | None = None) -> float:
    """Scalar PRESS, skipping the residual tensor kept by :func:`press_closed_form`."""
    Xc, d, h = _project(data, model, clamp)
    loo, _, _ = _loo(Xc, d, h, model.loadings)
    return float(np.einsum("ij,ij->", loo, loo) / Xc.shape[0])


def press_brute_force(data, r: int) -> float:
    """Exact leave-one-out PRESS: refit PCA without each row in turn.

    Each held-out row is centred by the mean of the remaining rows. When
    there are fewer rows than variables the refit goes through the
    double-centred Gram matrix of the remaining rows, which has the same
    leading right singular subspace as their SVD.
    """
    X = as_data_matrix(data)
    n, p = X.shape
    if n < r + 2:
        raise ValidationError(f"brute-force PRESS needs at least {r + 2} rows, got {n}")
    _check_rank(X[1:], r)
    total = 0.0
    gram = X @ X.T if n - 1 < p else None
    for i in range(n):
        keep = np.r_[0:i, i + 1 : n]
        rest = X[keep]
        mu = rest.mean(axis=0)
        if gram is None:
            _, _, Vt = np.linalg.svd(rest - mu, full_matrices=False)
            V = Vt[:r].T
        else:
            G = gram[np.ix_(keep, keep)]
            row = G.mean(axis=0)
            G = G - row[:, None] - row[None, :] + row.mean()
            w, U = eigh(G, subset_by_index=[n - 1 - r, n - 2])
            V = (rest - mu).T @ (U / np.sqrt(w))
        x = X[i] - mu
        e = x - (x @ V) @ V.T
        total += e @ e
    return total / n


def _influence(Xc, d, h, V):
    loo, w, scale = _loo(Xc, d, h, V)
    # loo @ (sum_r (I - v_r v_r^T)/(1-h_r) - (R-1) I)
    return loo * scale[:, None] - ((loo @ V) * w) @ V.T


def predictive_influence(data, model: SubspaceModel, clamp: float | None = None) -> Influence:
    """Predictive influence of every row of ``data`` under ``model``.

    ``pi(x_i) = e_-i (sum_r (I - v_r v_r^T)/(1 - h_i^(r)) - (R - 1) I)``
    where ``e_-i`` is the closed-form leave-one-out error.
    """
    Xc, d, h = _project(data, model, clamp)
    values = _influence(Xc, d, h, model.loadings)
    return Influence(values=values, magnitude=np.einsum("ij,ij->i", values, values))


def influence_magnitude(data, model: SubspaceModel, clamp: float | None = None) -> np.ndarray:
    """``||pi(x_i)||^2`` for every row."""
    return predictive_influence(data, model, clamp).magnitude


def weighted_eigen_operator(data, model: SubspaceModel) -> np.ndarray:
    """``X^T Xi^-2 X`` with ``Xi_i = (1 - h_i)**2``, for a one-component model.

    With the weights held fixed, the top eigenvector of this matrix minimises
    the summed squared predictive influence over unit vectors.
    """
    if model.rank != 1:
        raise ValidationError("the weighted eigenproblem is defined for one-component models")
    Xc, _, h = _project(data, model, None)
    xi = (1.0 - h[:, 0]) ** 2
    return Xc.T @ (Xc / xi[:, None] ** 2)
