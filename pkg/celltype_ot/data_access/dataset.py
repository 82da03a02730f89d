"""
Cell-level dataset ingestion.

A dataset file is delimited text with a header row: a `time` column, a
`cell_type` column and one or more numeric feature columns, one row per cell.
Tab is the delimiter when the header contains one, comma otherwise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
import pandas as pd

from celltype_ot.core.distributions import Marginal, Snapshot, empirical_marginal
from celltype_ot.core.embedding import Reducer, cost_from_centroids, reduce_features, type_centroids
from celltype_ot.core.uot_solver import CostMatrix
from celltype_ot.errors import ParseError
from celltype_ot.infra import log_utils

TIME_COLUMN = "time"
TYPE_COLUMN = "cell_type"
REQUIRED_COLUMNS = (TIME_COLUMN, TYPE_COLUMN)


@dataclass(frozen=True)
class CellRecord:
    time_index: int
    cell_type: str
    features: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented cells: `labels` are 1-based indices into `label_dictionary`."""

    time_index: np.ndarray
    labels: np.ndarray
    features: np.ndarray
    label_dictionary: tuple[str, ...]
    time_values: tuple[float, ...]
    feature_names: tuple[str, ...] = ()

    @property
    def d(self) -> int:
        return len(self.label_dictionary)

    @property
    def n_times(self) -> int:
        return len(self.time_values)

    def __len__(self) -> int:
        return int(self.labels.size)

    def snapshots(self) -> list[Snapshot]:
        return [Snapshot(t, self.labels[self.time_index == t]) for t in range(self.n_times)]

    def marginals(self) -> list[Marginal]:
        return [empirical_marginal(s, self.d) for s in self.snapshots()]

    def records(self) -> Iterator[CellRecord]:
        for t, label, row in zip(self.time_index, self.labels, self.features):
            yield CellRecord(int(t), self.label_dictionary[label - 1], tuple(float(v) for v in row))


def _delimiter(path: Path) -> str:
    with path.open("r", encoding="utf-8") as f:
        header = f.readline()
    if not header.strip():
        raise ParseError("empty file: a header row is required", line=1)
    return "\t" if "\t" in header else ","


def _first_bad_row(mask: np.ndarray) -> Optional[int]:
    bad = np.flatnonzero(mask)
    return int(bad[0]) if bad.size else None


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
    row = _first_bad_row(~np.isfinite(values))
    if row is not None:
        raise ParseError(f"column {column!r}: {frame[column].iloc[row]!r} is not a finite number", line=row + 2)
    return values


def parse_dataset(path) -> Dataset:
    """Read a dataset file; every malformed row is reported with its 1-based line number."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"{path}: no such file")
    sep = _delimiter(path)
    try:
        frame = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError as exc:
        raise ParseError(f"empty file: {exc}", line=1) from exc
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ParseError(f"ragged row: {exc}", line=int(match.group(1)) if match else None) from exc

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(f"missing required column(s): {', '.join(missing)}", line=1)
    feature_names = tuple(c for c in frame.columns if c not in REQUIRED_COLUMNS)
    if not feature_names:
        raise ParseError("no feature columns after time and cell_type", line=1)
    if frame.empty:
        raise ParseError("header present but no cell records", line=2)

    row = _first_bad_row(frame.isna().any(axis=1).to_numpy())
    if row is not None:
        raise ParseError(f"ragged row: expected {len(frame.columns)} fields", line=row + 2)

    times = _numeric(frame, TIME_COLUMN)
    features = np.column_stack([_numeric(frame, c) for c in feature_names])
    cell_types = frame[TYPE_COLUMN].str.strip()
    row = _first_bad_row((cell_types == "").to_numpy())
    if row is not None:
        raise ParseError("empty cell_type", line=row + 2)

    label_dictionary = tuple(pd.unique(cell_types))
    labels = pd.Categorical(cell_types, categories=label_dictionary).codes.astype(np.int64) + 1
    time_values = np.unique(times)
    time_index = np.searchsorted(time_values, times)
    if time_values.size > 2 and not np.allclose(np.diff(time_values), time_values[1] - time_values[0]):
        log_utils.log_message(
            f"[ingest] {path.name}: time points are not evenly spaced; treating them as consecutive steps", "WARN"
        )

    log_utils.log_message(
        f"[ingest] {path.name}: {len(frame)} cells, {len(label_dictionary)} types, "
        f"{time_values.size} time points, {len(feature_names)} features"
    )
    return Dataset(
        time_index=time_index.astype(np.int64),
        labels=labels,
        features=features,
        label_dictionary=label_dictionary,
        time_values=tuple(float(t) for t in time_values),
        feature_names=feature_names,
    )


def compute_centroids(dataset: Dataset, reducer: Reducer = "identity") -> np.ndarray:
    """(d, K) per-type mean features pooled over all time points, in label-dictionary order."""
    reduced = reduce_features(dataset.features, reducer)
    return type_centroids(reduced, dataset.labels, dataset.d, dataset.label_dictionary)


def dataset_cost(dataset: Dataset, reducer: Reducer = "identity") -> CostMatrix:
    return cost_from_centroids(compute_centroids(dataset, reducer))
