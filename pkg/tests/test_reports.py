import json
import math

import pytest

from src.davis.certificates import deviation_row, ratio_row, report_row
from src.harness.reports import CSV_COLUMNS, GLOBAL_ID, CheckReport, ReportRow, ReportStore


@pytest.fixture
def report():
    return CheckReport(rows=[
        ReportRow(0, 101, ratio_row("type1-p", 1.0, 1.0, 4.0, p=1.0)),
        ReportRow(1, 202, ratio_row("type1-p", 3.0, 1.0, 4.0, p=1.0)),
        ReportRow(2, 303, ratio_row("type1-p", 5.0, 1.0, 4.0, p=1.0)),
        ReportRow(2, 303, report_row("stein", 2.0, 1.0, q=4.0)),
        ReportRow(GLOBAL_ID, 7, deviation_row("type1-reconstruction", math.inf, 0.0)),
    ], runtime=1.5, check_runtime={"davis-type1": 1.0})


def test_csv_layout(tmp_path, report):
    path = ReportStore(tmp_path / "out").write_csv(report)
    lines = path.read_text().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1] == "0,type1-p,1.0,nan,1.0,1.0,4.0,1.0,true,101"
    assert lines[3].endswith(",false,303")
    assert lines[5].startswith("global,type1-reconstruction,nan,nan,inf,")
    assert lines[-1] == ""


def test_csv_is_deterministic(tmp_path, report):
    store = ReportStore(tmp_path)
    first = store.write_csv(report, "a.csv").read_bytes()
    assert store.write_csv(report, "b.csv").read_bytes() == first


def test_failures_and_summary(report):
    assert not report.passed
    assert len(report.failures) == 2
    summary = report.summary()
    family = summary["type1-p"]
    assert family["rows"] == 3
    assert family["failures"] == 1
    assert family["failed_seeds"] == [303]
    assert family["argmax_seed"] == 303
    assert family["max_ratio"] == pytest.approx(5.0)
    assert not summary["stein"]["asserted"]


def test_write_formats(tmp_path, report):
    store = ReportStore(tmp_path)
    paths = store.write(report)
    assert [p.name for p in paths] == ["report.csv", "summary.json"]
    payload = json.loads(paths[1].read_text())
    assert payload["failures"] == 2 and "table" not in payload

    (json_path,) = store.write(report, "json")
    payload = json.loads(json_path.read_text())
    assert len(payload["table"]) == 5
    assert payload["table"][3]["check"] == "stein"
    assert payload["table"][3]["pass"] == "true"
