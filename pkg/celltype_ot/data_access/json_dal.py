"""JSON file-based implementation of the Data Access Layer."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Sequence

import numpy as np
import pandas as pd

from celltype_ot.data_access.dataset import TIME_COLUMN, TYPE_COLUMN, Dataset, parse_dataset
from celltype_ot.data_access.report import AnalysisReport, write_report
from celltype_ot.errors import ParseError
from celltype_ot.infra import log_utils
from .dal import DataAccessLayer

INDEX_KEYS = ("change_times", "change_points")


class JsonDal(DataAccessLayer):
    """Data Access Layer that persists artifacts as JSON, CSV and SVG files on disk."""

    def _read_json(self, path: Path) -> Any:
        path = Path(path)
        if not path.is_file():
            raise ParseError(f"{path}: no such file")
        try:
            with path.open("r", encoding="utf-8") as f:
                return json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path.name}: {exc.msg}", line=exc.lineno) from exc

    def _write_json(self, path: Path, data: Any) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write("\n")

    # --- Datasets ------------------------------------------------------------
    def load_dataset(self, path: Path) -> Dataset:
        return parse_dataset(path)

    def save_simulated_dataset(
        self,
        time_index: Sequence[int],
        cell_types: Sequence[str],
        features: Any,
        path: Path,
    ) -> None:
        features = np.asarray(features, dtype=float)
        frame = pd.DataFrame(features, columns=[f"g{i + 1}" for i in range(features.shape[1])])
        frame.insert(0, TYPE_COLUMN, list(cell_types))
        frame.insert(0, TIME_COLUMN, np.asarray(time_index, dtype=np.int64))
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n")
        log_utils.log_message(f"[simulate] wrote {len(frame)} cells to {path}")

    # --- Reports -------------------------------------------------------------
    def save_report(self, report: AnalysisReport, path: Path) -> None:
        write_report(report, path)

    def save_heatmap(self, svg: str, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(svg, encoding="utf-8")

    def save_truth(self, truth: Dict[str, Any], path: Path) -> None:
        self._write_json(path, truth)

    def save_benchmark(self, report: Dict[str, Any], path: Path) -> None:
        self._write_json(path, report)

    # --- Evaluation inputs ---------------------------------------------------
    def load_index_set(self, path: Path) -> set:
        data = self._read_json(path)
        if isinstance(data, dict):
            key = next((k for k in INDEX_KEYS if k in data), None)
            if key is None:
                raise ParseError(f"{Path(path).name}: expected a list or an object with one of {', '.join(INDEX_KEYS)}")
            data = data[key]
        if not isinstance(data, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in data):
            raise ParseError(f"{Path(path).name}: index set must be a list of integers")
        return set(data)
