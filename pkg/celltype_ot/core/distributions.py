"""
Categorical marginals per time point.

Categories are the integers 1..d, fixed by the label dictionary built at
ingestion; every vector and matrix in the package uses that ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from celltype_ot.errors import DegenerateInputError, InputError, PreconditionError

SUM_TOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Marginal:
    """A probability vector Q_t over d categories."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise InputError(f"marginal must be a non-empty vector, got shape {probs.shape}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise InputError("marginal entries must be finite and nonnegative")
        total = float(probs.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise InputError(f"marginal sums to {total!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_vector(cls, values, tol: float = 1e-10) -> "Marginal":
        """Accept a vector summing to 1 within `tol` and renormalize it exactly."""
        arr = np.clip(np.asarray(values, dtype=float), 0.0, None)
        total = float(arr.sum())
        if abs(total - 1.0) > tol:
            raise DegenerateInputError(f"vector sums to {total!r}, outside 1 ± {tol:g}")
        return cls(arr / total)

    @property
    def d(self) -> int:
        return int(self.probs.size)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0))

    def __len__(self) -> int:
        return self.d

    def __repr__(self) -> str:
        return f"Marginal({np.array2string(self.probs, precision=4)})"


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Cell-type labels (1..d) of the n_t cells sampled at one time point."""

    time_index: int
    labels: np.ndarray

    def __post_init__(self):
        labels = _frozen(self.labels, dtype=np.int64)
        if self.time_index < 0:
            raise InputError(f"time index must be >= 0, got {self.time_index}")
        if labels.ndim != 1 or labels.size == 0:
            raise InputError(f"snapshot at t={self.time_index} has no cells")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return int(self.labels.size)


@dataclass(frozen=True, eq=False)
class GrowthProfile:
    """Per-category growth multipliers g_{t,j} for one time step."""

    rates: np.ndarray

    def __post_init__(self):
        rates = _frozen(self.rates)
        if rates.ndim != 1 or not np.all(np.isfinite(rates)) or np.any(rates <= 0):
            raise InputError("growth rates must be a vector of finite positive numbers")
        object.__setattr__(self, "rates", rates)


def empirical_marginal(snapshot: Snapshot, d: int) -> Marginal:
    """Category frequencies count(labels == k) / n_t."""
    labels = snapshot.labels
    bad = np.flatnonzero((labels < 1) | (labels > d))
    if bad.size:
        i = int(bad[0])
        raise InputError(
            f"snapshot t={snapshot.time_index}, record {i}: label {int(labels[i])} outside 1..{d}"
        )
    counts = np.bincount(labels - 1, minlength=d).astype(float)
    return Marginal(counts / snapshot.n)


def smooth(q: Marginal, delta: float) -> Marginal:
    """Additive smoothing (q_k + delta) / (1 + d * delta); strictly positive."""
    if not delta > 0:
        raise PreconditionError(f"smoothing delta must be > 0, got {delta!r}")
    probs = (q.probs + delta) / (1.0 + q.d * delta)
    return Marginal(probs / probs.sum())


def apply_growth(q: Marginal, g: GrowthProfile) -> Marginal:
    """The growth map g_t(Q_t): entrywise g_j q_j renormalized to unit mass."""
    if g.rates.size != q.d:
        raise InputError(f"growth profile has {g.rates.size} rates for {q.d} categories")
    if np.all(g.rates == g.rates[0]):
        return q
    grown = g.rates * q.probs
    total = grown.sum()
    if not total > 0:
        raise DegenerateInputError("growth map undefined: every g_j * q_j is zero")
    return Marginal(grown / total)


def stack(marginals: Sequence[Marginal]) -> np.ndarray:
    """(T+1) x d array view of a marginal sequence."""
    return np.vstack([q.probs for q in marginals])
