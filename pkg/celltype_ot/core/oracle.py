"""
Grid-search reference solver for small (d <= 3) semi-relaxed transport problems.

Every column of a feasible plan is a nonnegative vector summing to q_tgt[k],
so each column has d - 1 free coordinates. The oracle enumerates a grid on
those coordinates, column by column, and scores the exact (non-entropic)
objective over the cartesian product of columns. Products larger than
`point_budget` are searched coarse-to-fine around the incumbent; the
objective is convex in the plan, so the zoom keeps the global minimizer in
view.
"""

from __future__ import annotations

import itertools
import math
from typing import Optional

import numpy as np
from more_itertools import chunked
from scipy.special import rel_entr

from celltype_ot.core.distributions import Marginal
from celltype_ot.core.uot_solver import CostMatrix, TransportPlan
from celltype_ot.errors import UnsupportedSizeError
from celltype_ot.infra import log_utils

MAX_D = 3
POINT_BUDGET = 30_000_000
_CHUNK_POINTS = 2_000_000
_ZOOM_HALF_WIDTH = 4


def _axis(q_k: float, step: float, center: Optional[float] = None) -> np.ndarray:
    if center is None:
        values = np.append(np.arange(0.0, q_k, step), q_k)
    else:
        values = center + step * np.arange(-_ZOOM_HALF_WIDTH, _ZOOM_HALF_WIDTH + 1)
    return np.unique(np.clip(values, 0.0, q_k))


def _column_grid(q_k: float, d: int, step: float, center: Optional[np.ndarray] = None) -> np.ndarray:
    """All grid vectors x >= 0 with sum(x) == q_k; shape (n, d)."""
    if q_k <= 0:
        return np.zeros((1, d))
    axes = [_axis(q_k, step, None if center is None else center[i]) for i in range(d - 1)]
    free = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    free = free[free.sum(axis=1) <= q_k * (1 + 1e-12)]
    last = np.clip(q_k - free.sum(axis=1), 0.0, None)
    return np.column_stack([free, last])


def _full_grid_size(q: np.ndarray, d: int, step: float) -> float:
    total = 1.0
    for q_k in q:
        n = math.floor(q_k / step) + 2 if q_k > 0 else 1
        total *= math.comb(n + d - 2, d - 1)
    return total


def _search(columns: list[np.ndarray], m: np.ndarray, p: np.ndarray, lam: float):
    """Exact objective minimized over the product of per-column candidates."""
    linear = [grid @ m[:, k] for k, grid in enumerate(columns)]
    head, tail = columns[:-1], columns[-1]
    tail_linear = linear[-1]
    chunk = max(1, _CHUNK_POINTS // len(tail))

    best_value, best_plan = np.inf, None
    index_space = itertools.product(*(range(len(g)) for g in head))
    for batch in chunked(index_space, chunk):
        idx = np.asarray(batch)
        rows = sum(head[k][idx[:, k]] for k in range(len(head)))
        lin = sum(linear[k][idx[:, k]] for k in range(len(head)))
        row_sums = rows[:, None, :] + tail[None, :, :]
        values = lin[:, None] + tail_linear[None, :] + lam * rel_entr(row_sums, p).sum(axis=2)
        flat = int(np.argmin(values))
        i, j = divmod(flat, len(tail))
        if values[i, j] < best_value:
            best_value = float(values[i, j])
            best_plan = np.column_stack([head[k][idx[i, k]] for k in range(len(head))] + [tail[j]])
    return best_value, best_plan


def oracle_solve(q_src: Marginal, q_tgt: Marginal, m: CostMatrix, lam: float, grid_step: float,
                 point_budget: int = POINT_BUDGET) -> TransportPlan:
    """Grid minimizer of sum(m * pi) + lam * KL(pi 1 || q_src) subject to pi^T 1 = q_tgt."""
    d = m.d
    if d > MAX_D:
        raise UnsupportedSizeError(f"oracle enumerates d <= {MAX_D} categories, got d={d}")
    q = np.asarray(q_tgt.probs)
    p = np.asarray(q_src.probs)
    if d == 1:
        return TransportPlan(np.ones((1, 1)), q_src, q_tgt)

    step = grid_step
    while _full_grid_size(q, d, step) > point_budget:
        step *= 2.0
    columns = [_column_grid(q_k, d, step) for q_k in q]
    value, plan = _search(columns, m.entries, p, lam)

    while step > grid_step:
        step = max(grid_step, step / 2.0)
        columns = [_column_grid(q_k, d, step, center=plan[:-1, k]) for k, q_k in enumerate(q)]
        value, plan = _search(columns, m.entries, p, lam)

    log_utils.log_message(f"[oracle] d={d} lambda={lam:g} step={grid_step:g} objective={value:.6g}", "DEBUG")
    return TransportPlan(plan, q_src, q_tgt)
