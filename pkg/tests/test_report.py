import json

import numpy as np
import pytest
from pydantic import ValidationError

from celltype_ot.data_access.report import (
    AnalysisReport,
    ConfigEcho,
    MatrixPayload,
    PairRecord,
    dump_report,
    read_report,
    write_report,
)
from celltype_ot.errors import ParseError, SchemaVersionError


def make_report(times=(0, 1)):
    eye = MatrixPayload.of(np.eye(2) / 2)
    pairs = [
        PairRecord(t=t, w=0.1 * (t + 1) / 3, iterations=12, plan=eye, forward=MatrixPayload.of(np.eye(2)),
                   backward=MatrixPayload.of(np.eye(2)), forward_zero_columns=[], backward_zero_columns=[2])
        for t in times
    ]
    return AnalysisReport(
        source="cells.csv",
        label_dictionary=["stem", "neuron"],
        time_values=[0.0, 1.0, 2.0],
        marginals=[[0.5, 0.5]] * 3,
        cost=MatrixPayload.of([[0.0, 1.0 / 3], [1.0 / 3, 0.0]]),
        pairs=pairs,
        w_series=[p.w for p in pairs],
        change_points=[1],
        threshold_used=0.05,
        config=ConfigEcho(lambda_=1.0, epsilon=None, epsilon_scale=1e-3, max_iters=10000,
                          convergence_tol=1e-10, delta=1e-6, window=2, threshold_k=3.0, reducer="identity"),
    )


def test_report_round_trips_exactly(tmp_path):
    report = make_report()
    path = tmp_path / "out" / "report.json"
    write_report(report, path)
    again = read_report(path)
    assert again == report
    assert again.cost.to_array()[0, 1] == 1.0 / 3


def test_report_uses_lambda_key_and_version():
    data = json.loads(dump_report(make_report()))
    assert data["schema_version"] == 1
    assert data["config"]["lambda"] == 1.0
    assert data["cost"] == {"shape": [2, 2], "values": [0.0, 1.0 / 3, 1.0 / 3, 0.0]}


def test_pairs_must_be_contiguous():
    with pytest.raises(ValidationError):
        make_report(times=(0, 2))


def test_matrix_payload_checks_shape():
    with pytest.raises(ValidationError):
        MatrixPayload(shape=[2, 2], values=[1.0, 2.0, 3.0])


def test_truncated_report_is_a_parse_error(tmp_path):
    path = tmp_path / "report.json"
    path.write_text(dump_report(make_report())[:200], encoding="utf-8")
    with pytest.raises(ParseError):
        read_report(path)


def test_unknown_schema_version_is_rejected(tmp_path):
    data = json.loads(dump_report(make_report()))
    data["schema_version"] = 2
    path = tmp_path / "report.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(SchemaVersionError) as info:
        read_report(path)
    assert info.value.found == 2


def test_invalid_content_is_a_parse_error(tmp_path):
    data = json.loads(dump_report(make_report()))
    data["pairs"][1]["t"] = 5
    path = tmp_path / "report.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ParseError):
        read_report(path)
