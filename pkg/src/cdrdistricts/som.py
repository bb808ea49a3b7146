"""Self-organizing map in its standard online form.

Codebook vectors start uniform over the data bounding box (seeded), then
learn by competitive updates with a Gaussian neighborhood; learning rate
and radius decay linearly over the epochs.  Training is sequential and
seed-deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput
from .stats import Ecdf, ecdf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SomParams:
    epochs: int = 500
    lr_start: float = 0.5
    lr_end: float = 0.01
    radius_start: Optional[float] = None  # default max(rows, cols) / 2
    radius_end: float = 1.0


@dataclass
class SomModel:
    rows: int
    cols: int
    codebook: np.ndarray  # (rows*cols, dim)
    params: SomParams
    seed: int
    quantization_errors: list[float] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    def node_position(self, index: int) -> tuple[int, int]:
        return divmod(index, self.cols)


def _bmu_indices(codebook: np.ndarray, X: np.ndarray) -> np.ndarray:
    # argmin returns the first (lowest) index on ties
    d2 = ((X[:, None, :] - codebook[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def quantization_error(codebook: np.ndarray, X: np.ndarray) -> float:
    d2 = ((X[:, None, :] - codebook[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min(axis=1)).mean())


def som_train(
    X: np.ndarray,
    rows: int,
    cols: int,
    params: SomParams | None = None,
    seed: int = 0,
) -> SomModel:
    """Train a rows x cols map on standardized input vectors."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInput("som_train needs a non-empty 2-D input array")
    params = params or SomParams()
    n, dim = X.shape
    n_nodes = rows * cols
    if n < n_nodes:
        log.warning("training %d nodes on only %d vectors", n_nodes, n)
    rng = np.random.default_rng(seed)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    codebook = rng.uniform(lo, hi, size=(n_nodes, dim))
    grid = np.array([divmod(i, cols) for i in range(n_nodes)], dtype=float)
    grid_d2 = ((grid[:, None, :] - grid[None, :, :]) ** 2).sum(axis=2)
    radius_start = params.radius_start
    if radius_start is None:
        radius_start = max(rows, cols) / 2.0
    qe: list[float] = []
    epochs = params.epochs
    for epoch in range(epochs):
        frac = epoch / (epochs - 1) if epochs > 1 else 1.0
        lr = params.lr_start + (params.lr_end - params.lr_start) * frac
        radius = radius_start + (params.radius_end - radius_start) * frac
        h_rows = np.exp(-grid_d2 / (2.0 * radius * radius))
        for i in rng.permutation(n):
            x = X[i]
            bmu = int(np.argmin(((codebook - x) ** 2).sum(axis=1)))
            codebook += (lr * h_rows[bmu])[:, None] * (x - codebook)
        qe.append(quantization_error(codebook, X))
    return SomModel(
        rows=rows,
        cols=cols,
        codebook=codebook,
        params=params,
        seed=seed,
        quantization_errors=qe,
    )


def som_assign(model: SomModel, X: np.ndarray) -> np.ndarray:
    """Best-matching unit per row; ties resolve to the lowest node index."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.codebook.shape[1]:
        raise DimensionMismatch(
            f"expected dim {model.codebook.shape[1]}, got {X.shape}"
        )
    return _bmu_indices(model.codebook, X)


@dataclass(frozen=True)
class ClusterContrast:
    node_counts: tuple[int, ...]
    node_target_means: tuple[Optional[float], ...]
    ecdf_a: Ecdf
    ecdf_b: Ecdf


def cluster_contrast(
    assignments: Sequence[int],
    target: Sequence[float],
    group_a: Sequence[int],
    group_b: Sequence[int],
    n_nodes: int,
) -> ClusterContrast:
    """Per-node target means plus ECDFs of two contrasting node groups."""
    assignments = np.asarray(assignments)
    target = np.asarray(target, dtype=float)
    counts = []
    means: list[Optional[float]] = []
    for node in range(n_nodes):
        mask = assignments == node
        counts.append(int(mask.sum()))
        means.append(float(target[mask].mean()) if mask.any() else None)
    in_a = np.isin(assignments, list(group_a))
    in_b = np.isin(assignments, list(group_b))
    return ClusterContrast(
        node_counts=tuple(counts),
        node_target_means=tuple(means),
        ecdf_a=ecdf(target[in_a].tolist()),
        ecdf_b=ecdf(target[in_b].tolist()),
    )
