"""Feature reduction, per-type centroids and the centroid cost matrix."""

from __future__ import annotations

from typing import Literal, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from celltype_ot.core.uot_solver import CostMatrix
from celltype_ot.errors import ConfigurationError, CoverageError, InputError

Reducer = Literal["identity", "principal_axes"]
REDUCERS = ("identity", "principal_axes")


def reduce_features(features: np.ndarray, reducer: Reducer = "identity", n_axes: int = 2) -> np.ndarray:
    """Identity, or projection of centered features on their top principal axes.

    The axes are the leading eigenvectors of the pooled covariance
    (`numpy.linalg.eigh`), which stands in for a nonlinear 2-D embedding.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] == 0:
        raise InputError(f"features must be an (n, K) matrix with K >= 1, got shape {x.shape}")
    if reducer == "identity":
        return x
    if reducer != "principal_axes":
        raise ConfigurationError(f"unknown reducer {reducer!r}; expected one of {', '.join(REDUCERS)}")
    if x.shape[1] <= n_axes:
        return x - x.mean(axis=0)
    centered = x - x.mean(axis=0)
    _, vectors = np.linalg.eigh(np.cov(centered, rowvar=False))
    axes = vectors[:, ::-1][:, :n_axes]
    return centered @ axes


def type_centroids(features: np.ndarray, labels: np.ndarray, d: int,
                   names: Optional[Sequence[str]] = None) -> np.ndarray:
    """(d, K) matrix of mean feature vectors per 1-based type label, pooled over all cells."""
    x = np.asarray(features, dtype=float)
    idx = np.asarray(labels, dtype=np.int64) - 1
    counts = np.bincount(idx, minlength=d)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        names = list(names) if names is not None else [str(j + 1) for j in range(d)]
        raise CoverageError([names[j] for j in missing])
    sums = np.zeros((d, x.shape[1]))
    np.add.at(sums, idx, x)
    return sums / counts[:, None]


def cost_from_centroids(centroids: np.ndarray) -> CostMatrix:
    """m_jk = ||zeta_j - zeta_k||^2."""
    z = np.asarray(centroids, dtype=float)
    if z.ndim != 2 or z.shape[0] < 2:
        raise InputError(f"need at least 2 centroids, got shape {z.shape}")
    return CostMatrix(cdist(z, z, metric="sqeuclidean"))
