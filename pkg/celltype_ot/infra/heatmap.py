"""
SVG figures rendered through Jinja2 templates.

`render_heatmap` draws one transport plan with its marginals as bar strips;
`render_w_series` draws the W series with the detection threshold and the
flagged change points.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from jinja2 import Environment, PackageLoader

from celltype_ot.core.uot_solver import TransportPlan

CELL = 36
LEFT = 110
TOP = 90
STRIP = 60
GAP = 6

PLOT_W = 640
PLOT_H = 240
MARGIN = 50

_env = Environment(loader=PackageLoader("celltype_ot", "templates"), autoescape=True,
                   trim_blocks=False, keep_trailing_newline=True)


def cell_fill(value: float, vmax: float) -> str:
    """White at zero to pure blue at `vmax`; darker means more mass."""
    level = 0 if vmax <= 0 else int(round(255 * (1.0 - min(value / vmax, 1.0))))
    return f"#{level:02x}{level:02x}ff"


def render_heatmap(plan: TransportPlan, labels: Optional[Sequence[str]] = None, title: Optional[str] = None) -> str:
    """Rows are source types at t, columns target types at t+1.

    The right-hand strip pairs Q_t (upper bar) with the plan's row sums (lower
    bar) on one scale, so the mass the KL relaxation created or removed shows
    as a length difference.
    """
    pi = plan.entries
    d = plan.d
    labels = list(labels) if labels is not None else [str(j + 1) for j in range(d)]
    vmax = float(pi.max())
    grid_w = d * CELL
    half = (CELL - 8) // 2

    cells = [
        {"x": LEFT + k * CELL, "y": TOP + j * CELL, "row": j + 1, "col": k + 1,
         "value": repr(float(pi[j, k])), "fill": cell_fill(float(pi[j, k]), vmax)}
        for j in range(d) for k in range(d)
    ]

    def scale(*strips: np.ndarray) -> float:
        return max(float(s.max()) for s in strips) or 1.0

    def row_bars(masses: np.ndarray, top: float, offset: int) -> list[dict]:
        return [{"x": LEFT + grid_w + GAP, "y": TOP + j * CELL + 4 + offset, "row": j + 1,
                 "width": round(STRIP * float(mass) / top, 3), "height": half, "value": repr(float(mass))}
                for j, mass in enumerate(masses)]

    source = plan.source_marginal.probs
    rows = plan.row_marginal
    row_top = scale(source, rows)
    columns = plan.column_marginal
    col_top = scale(columns)
    column_bars = []
    for k, mass in enumerate(columns):
        length = round(STRIP * float(mass) / col_top, 3)
        column_bars.append({"x": LEFT + k * CELL + 4, "y": TOP - GAP - length, "col": k + 1,
                            "width": CELL - 8, "height": length, "value": repr(float(mass))})

    context = {
        "title": title or f"transport plan t={plan.time_index} -> t={plan.time_index + 1}",
        "width": LEFT + grid_w + GAP + STRIP + 20,
        "height": TOP + d * CELL + 80,
        "left": LEFT,
        "size": CELL,
        "cells": cells,
        "source_bars": row_bars(source, row_top, 0),
        "row_bars": row_bars(rows, row_top, half),
        "column_bars": column_bars,
        "row_labels": [{"x": LEFT - GAP, "y": TOP + j * CELL + CELL // 2, "text": labels[j]} for j in range(d)],
        "column_labels": [{"x": LEFT + k * CELL + CELL // 2, "y": TOP + d * CELL + 12, "text": labels[k]}
                          for k in range(d)],
    }
    return _env.get_template("heatmap.svg.j2").render(**context)


def render_w_series(values: Sequence[float], change_points: Sequence[int] = (),
                    threshold: Optional[float] = None, time_values: Optional[Sequence[float]] = None,
                    title: Optional[str] = None) -> str:
    """Line plot of W_t against the pair index t; detected change points are marked.

    `time_values`, when given, labels each pair as "from->to" in the point tooltips.
    """
    w = np.asarray(values, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("W series must be a nonempty one-dimensional sequence")
    flagged = set(int(t) for t in change_points)
    top = max(float(w.max()), threshold or 0.0) or 1.0
    step = PLOT_W / max(w.size - 1, 1)

    def y_of(value: float) -> float:
        return round(MARGIN + PLOT_H * (1.0 - value / top), 3)

    points = []
    for t, value in enumerate(w):
        label = f"t={t}"
        if time_values is not None:
            label += f" ({time_values[t]:g}->{time_values[t + 1]:g})"
        points.append({"x": round(MARGIN + t * step, 3), "y": y_of(float(value)), "t": t,
                       "value": repr(float(value)), "change": t in flagged, "label": label})

    context = {
        "title": title or f"W series over {w.size} pairs",
        "width": PLOT_W + 2 * MARGIN,
        "height": PLOT_H + 2 * MARGIN,
        "left": MARGIN,
        "right": MARGIN + PLOT_W,
        "bottom": MARGIN + PLOT_H,
        "top": MARGIN,
        "y_max": f"{top:.4g}",
        "polyline": " ".join(f"{p['x']},{p['y']}" for p in points),
        "points": points,
        "threshold": None if threshold is None else {"y": y_of(threshold), "value": repr(float(threshold))},
        "ticks": [{"x": p["x"], "text": p["t"]} for p in points if p["t"] % max(1, w.size // 10) == 0],
    }
    return _env.get_template("w_series.svg.j2").render(**context)
