"""
Change-point statistic W_t and its peak detector.

W_t is the unbalanced transport cost between consecutive marginals. Growth
alone moves little mass along the cost (the KL term absorbs it), so
differentiation events show up as isolated local maxima of the series.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.stats import median_abs_deviation

from celltype_ot.config import settings
from celltype_ot.core.distributions import Marginal
from celltype_ot.core.uot_solver import CostMatrix, SolverConfig, TransportPlan, objective, solve_sequence
from celltype_ot.errors import InputError, InsufficientDataError, PreconditionError
from celltype_ot.infra import log_utils

W_FLOOR = -1e-10
MIN_SERIES_FOR_PEAKS = 3
LOG_FLOOR = 1e-9  # relative to the largest W, keeps log W finite on zero entries

ThresholdScale = Literal["log", "linear"]
THRESHOLD_SCALES = ("log", "linear")


@dataclass(frozen=True, eq=False)
class WSeries:
    """W_0..W_{T-1}; `time_offset` shifts reported indices."""

    values: np.ndarray
    lambda_: float
    time_offset: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 1:
            raise InputError("W series must be one-dimensional")
        if np.any(values < W_FLOOR):
            raise InputError(f"W series has a negative entry {values.min():.3e}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class ChangePointReport:
    detected: tuple[int, ...]
    threshold_used: float
    window_used: int


@dataclass(frozen=True)
class DetectionMetrics:
    precision: float
    recall: float
    f_score: float

    def as_row(self) -> list[float]:
        return [self.precision, self.recall, self.f_score]


def w_series_from_plans(plans: Sequence[TransportPlan], m: CostMatrix, lam: float,
                        time_offset: int = 0) -> WSeries:
    """Series of exact objectives of already-solved plans, clipped at zero."""
    values = [max(objective(plan, m, lam), 0.0) for plan in plans]
    return WSeries(np.asarray(values, dtype=float), lam, time_offset)


def compute_w_series(marginals: Sequence[Marginal], m: CostMatrix, config: Optional[SolverConfig] = None,
                     delta: Optional[float] = None, threads: int = 1) -> WSeries:
    """W_t = W^lambda(Q_t, Q_{t+1}) for t = 0..T-1.

    Source marginals must be strictly positive; pass `delta` to smooth them here.
    """
    if len(marginals) < 2:
        raise InsufficientDataError(f"need ≥ 2 time points, got {len(marginals)}")
    config = config or SolverConfig()
    plans = solve_sequence(marginals, m, config, delta=delta, threads=threads)
    return w_series_from_plans(plans, m, config.lambda_)


def _robust_cut(scored: np.ndarray, threshold_k: float) -> float:
    mad = median_abs_deviation(scored, scale=1.0 / settings.MAD_SCALE)
    return float(np.median(scored) + threshold_k * mad)


def detect_peaks(series: WSeries, window: Optional[int] = None, threshold_k: Optional[float] = None,
                 scale: Optional[ThresholdScale] = None) -> ChangePointReport:
    """Strict local maxima within +/- window that also clear median + k * MAD.

    With `scale="log"` the median and MAD are taken of log W, so a peak has to
    stand out by a robust factor over the typical step; `scale="linear"`
    applies the rule to W itself. `threshold_used` is in W units either way.
    """
    window = settings.PEAK_WINDOW if window is None else window
    threshold_k = settings.PEAK_THRESHOLD_K if threshold_k is None else threshold_k
    scale = settings.PEAK_THRESHOLD_SCALE if scale is None else scale
    if window < 1:
        raise PreconditionError(f"peak window must be >= 1, got {window}")
    if not threshold_k > 0:
        raise PreconditionError(f"threshold_k must be > 0, got {threshold_k}")
    if scale not in THRESHOLD_SCALES:
        raise PreconditionError(f"threshold scale must be one of {', '.join(THRESHOLD_SCALES)}, got {scale!r}")
    values = np.clip(series.values, 0.0, None)
    if values.size < MIN_SERIES_FOR_PEAKS:
        raise InsufficientDataError(f"peak detection needs at least {MIN_SERIES_FOR_PEAKS} W values, got {values.size}")

    if scale == "log":
        top = float(values.max())
        floor = LOG_FLOOR * top if top > 0 else 1.0
        scored = np.log(values + floor)
        cut = _robust_cut(scored, threshold_k)
        threshold = max(float(np.exp(cut)) - floor, 0.0)
    else:
        scored = values
        cut = threshold = _robust_cut(values, threshold_k)

    padded = np.pad(values, window, constant_values=-np.inf)
    neighbours = sliding_window_view(padded, 2 * window + 1).copy()
    neighbours[:, window] = -np.inf
    is_peak = (values > neighbours.max(axis=1)) & (scored > cut)

    detected = tuple(int(t) + series.time_offset for t in np.flatnonzero(is_peak))
    log_utils.log_message(
        f"[peaks] window={window} k={threshold_k:g} scale={scale} threshold={threshold:.4g} "
        f"detected={list(detected)}", "DEBUG"
    )
    return ChangePointReport(detected, threshold, window)


def score_detection(truth: Iterable[int], detected: Iterable[int]) -> DetectionMetrics:
    """Exact-index precision, recall and F-score; an empty detection scores zero."""
    truth, detected = set(truth), set(detected)
    if not truth:
        raise PreconditionError("ground-truth change set must be nonempty")
    hits = len(truth & detected)
    precision = hits / len(detected) if detected else 0.0
    recall = hits / len(truth)
    f_score = 2 * precision * recall / (precision + recall) if precision > 0 and recall > 0 else 0.0
    return DetectionMetrics(precision, recall, f_score)
