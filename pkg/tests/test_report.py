import json

import pytest

from freeconv.errors import ValidationError
from freeconv.report import CriterionRecord, ReportDocument


def make_report():
    return ReportDocument(
        experiment_id="demo",
        inputs={"alpha": 1.5},
        metrics={"gap": 0.004},
        criteria=(
            CriterionRecord("gap", 0.004, 0.01),
            CriterionRecord("ratio", 1.02, (0.85, 1.15), comparator="in"),
        ),
        wall_time_s=0.1,
        seed=7,
    )


def test_verdicts_derive_from_metrics():
    report = make_report()
    assert report.passed
    failing = CriterionRecord("gap", 0.02, 0.01)
    assert not failing.passed


def test_json_round_trip():
    report = make_report()
    back = ReportDocument.from_json(report.to_json())
    assert back.as_dict() == report.as_dict()


def test_tampered_verdict_is_rejected():
    raw = json.loads(make_report().to_json())
    raw["criteria"][0]["passed"] = False  # inconsistent with value/tolerance
    with pytest.raises(ValidationError):
        ReportDocument.from_json(json.dumps(raw))


def test_unknown_comparator_rejected():
    with pytest.raises(ValidationError):
        CriterionRecord("x", 1.0, 2.0, comparator="~").passed