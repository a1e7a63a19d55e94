"""Seeded generators for the line / plane / sphere simulation scenarios.

Scenarios ``a``-``e`` place each cluster on a random linear subspace (or a
sphere inside one) of R^P. The ``sparse_*`` variants use the same cluster
layouts in P = 200 dimensions with loadings that are nonzero on only a few
variables, plus isotropic Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# (dimension, is_sphere) per cluster
LAYOUTS = {
    "a": ((1, False), (1, False)),
    "b": ((1, False), (2, False)),
    "c": ((2, False), (2, False)),
    "d": ((1, False), (2, False), (3, True)),
    "e": ((5, False), (4, True), (1, False), (1, False)),
}
SCENARIOS = tuple(LAYOUTS) + tuple(f"sparse_{s}" for s in LAYOUTS)

SPARSE_NOISE_SD = float(np.sqrt(0.5))


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    points_per_cluster: int = 100
    p: int | None = None
    noise_sd: float | None = None
    nonzeros: int = 10
    seed: int = 0
    coord_range: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.points_per_cluster < 1:
            raise ValidationError("points_per_cluster must be positive")
        if self.noise_sd is not None and self.noise_sd < 0:
            raise ValidationError("noise_sd must be nonnegative")
        if self.coord_range is not None and self.coord_range <= 0:
            raise ValidationError("coord_range must be positive")

    @property
    def is_sparse(self) -> bool:
        return self.scenario.startswith("sparse_")

    @property
    def layout(self):
        return LAYOUTS[self.scenario.removeprefix("sparse_")]

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(dim for dim, _ in self.layout)

    @property
    def dims(self) -> int:
        if self.p is not None:
            return self.p
        return 200 if self.is_sparse or self.scenario == "e" else 3

    @property
    def noise(self) -> float:
        if self.noise_sd is not None:
            return self.noise_sd
        return SPARSE_NOISE_SD if self.is_sparse else 0.0

    @property
    def half_width(self) -> float:
        # uniform coordinates lie in [-half_width, half_width]; spheres have this radius
        return 1.0 if self.coord_range is None else self.coord_range


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    data: np.ndarray
    labels: np.ndarray
    bases: list
    supports: list | None = None
    spec: ScenarioSpec | None = field(default=None, compare=False)

    @property
    def k(self) -> int:
        return len(self.bases)


def random_orthonormal_basis(p: int, r: int, rng) -> np.ndarray:
    """Orthonormalised columns of a standard normal ``p x r`` draw."""
    if not 1 <= r <= p:
        raise ValidationError(f"need 1 <= r <= p, got r={r}, p={p}")
    while True:
        Q, R = np.linalg.qr(rng.standard_normal((p, r)))
        diag = np.diag(R)
        if np.min(np.abs(diag)) > 1e-10:
            return Q * np.sign(diag)


def sparse_orthonormal_basis(p: int, r: int, nonzeros: int, rng):
    """Unit loadings with ``nonzeros`` entries each on disjoint random supports."""
    if nonzeros > p or r * nonzeros > p:
        raise ValidationError(f"{r} components with {nonzeros} nonzeros do not fit in {p} variables")
    idx = rng.choice(p, size=r * nonzeros, replace=False)
    supports = [np.sort(idx[j * nonzeros : (j + 1) * nonzeros]) for j in range(r)]
    basis = np.zeros((p, r))
    for j, s in enumerate(supports):
        vals = rng.standard_normal(nonzeros)
        basis[s, j] = vals / np.linalg.norm(vals)
    return basis, supports


def _coordinates(n, dim, sphere, half_width, rng):
    if sphere:
        z = rng.standard_normal((n, dim))
        return half_width * z / np.linalg.norm(z, axis=1, keepdims=True)
    return rng.uniform(-half_width, half_width, size=(n, dim))


def generate(spec: ScenarioSpec) -> SyntheticDataset:
    rng = np.random.default_rng(spec.seed)
    p = spec.dims
    if spec.is_sparse and spec.nonzeros > p:
        raise ValidationError(f"nonzeros={spec.nonzeros} exceeds p={p}")
    if max(spec.ranks) > p:
        raise ValidationError(f"scenario {spec.scenario} needs p >= {max(spec.ranks)}")
    blocks, labels, bases, supports = [], [], [], []
    for k, (dim, sphere) in enumerate(spec.layout, start=1):
        if spec.is_sparse:
            basis, support = sparse_orthonormal_basis(p, dim, spec.nonzeros, rng)
            supports.append(support)
        else:
            basis = random_orthonormal_basis(p, dim, rng)
        coords = _coordinates(spec.points_per_cluster, dim, sphere, spec.half_width, rng)
        blocks.append(coords @ basis.T)
        labels.append(np.full(spec.points_per_cluster, k))
        bases.append(basis)
    data = np.vstack(blocks)
    if spec.noise > 0:
        data = data + rng.normal(0.0, spec.noise, size=data.shape)
    return SyntheticDataset(
        data=data,
        labels=np.concatenate(labels),
        bases=bases,
        supports=supports if spec.is_sparse else None,
        spec=spec,
    )
