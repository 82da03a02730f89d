"""
Analysis report schema (version 1).

Matrices are stored row-major as {"shape": [rows, cols], "values": [...]}.
Floats are written with Python's shortest round-trip repr, so a report read
back compares equal to the one written.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from celltype_ot.errors import ParseError, SchemaVersionError

SCHEMA_VERSION = 1


class MatrixPayload(BaseModel):
    shape: list[int]
    values: list[float]

    @model_validator(mode="after")
    def _size_matches(self):
        if len(self.shape) != 2 or self.shape[0] * self.shape[1] != len(self.values):
            raise ValueError(f"matrix shape {self.shape} does not hold {len(self.values)} values")
        return self

    @classmethod
    def of(cls, matrix) -> "MatrixPayload":
        arr = np.asarray(matrix, dtype=float)
        return cls(shape=list(arr.shape), values=arr.ravel().tolist())

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float).reshape(self.shape)


class PairRecord(BaseModel):
    t: int
    w: float
    iterations: int
    plan: MatrixPayload
    forward: MatrixPayload
    backward: MatrixPayload
    forward_zero_columns: list[int] = []
    backward_zero_columns: list[int] = []


class ConfigEcho(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lambda_: float = Field(alias="lambda")
    epsilon: Optional[float]
    epsilon_scale: float
    max_iters: int
    convergence_tol: float
    delta: float
    window: int
    threshold_k: float
    threshold_scale: str = "log"
    reducer: str


class AnalysisReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    source: str = ""
    label_dictionary: list[str]
    time_values: list[float]
    marginals: list[list[float]]
    cost: MatrixPayload
    pairs: list[PairRecord]
    w_series: list[float]
    change_points: list[int]
    threshold_used: Optional[float] = None
    config: ConfigEcho

    @model_validator(mode="after")
    def _pairs_contiguous(self):
        times = [p.t for p in self.pairs]
        if times != list(range(len(times))):
            raise ValueError(f"pairs must cover t = 0..{len(times) - 1} in order, got {times}")
        if len(self.w_series) != len(self.pairs):
            raise ValueError("w_series length differs from the number of pairs")
        return self


def dump_report(report: AnalysisReport) -> str:
    return json.dumps(report.model_dump(mode="json", by_alias=True), indent=2, sort_keys=True) + "\n"


def write_report(report: AnalysisReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_report(report), encoding="utf-8")


def read_report(path) -> AnalysisReport:
    """Parse a report; truncated or malformed files raise ParseError, never a partial report."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"{path}: no such file")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path.name}: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path.name}: report must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(version, SCHEMA_VERSION)
    try:
        return AnalysisReport.model_validate(data)
    except ValidationError as exc:
        raise ParseError(f"{path.name}: {exc}") from exc
