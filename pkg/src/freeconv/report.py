"""Machine-readable experiment reports.

A report is self-contained: every verdict is recomputable from the metric
value, tolerance, and comparator stored next to it, so downstream tooling
never needs the code that produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ValidationError


def _apply(comparator: str, value, tolerance) -> bool:
    if comparator == "<=":
        return bool(value <= tolerance)
    if comparator == ">=":
        return bool(value >= tolerance)
    if comparator == "in":
        lo, hi = tolerance
        return bool(lo <= value <= hi)
    raise ValidationError(f"unknown comparator {comparator!r}")


@dataclass(frozen=True)
class CriterionRecord:
    """One named check: value measured, tolerance demanded, verdict."""

    name: str
    value: float
    tolerance: object
    comparator: str = "<="

    @property
    def passed(self) -> bool:
        return _apply(self.comparator, self.value, self.tolerance)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "comparator": self.comparator,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ReportDocument:
    """Verification record for one experiment run."""

    experiment_id: str
    inputs: dict
    metrics: dict
    criteria: tuple = ()
    wall_time_s: float = 0.0
    seed: object = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def as_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "inputs": self.inputs,
            "metrics": self.metrics,
            "criteria": [c.as_dict() for c in self.criteria],
            "verdict": "pass" if self.passed else "fail",
            "wall_time_s": self.wall_time_s,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        raw = json.loads(text)
        criteria = tuple(
            CriterionRecord(
                name=c["name"],
                value=c["value"],
                tolerance=tuple(c["tolerance"])
                if isinstance(c["tolerance"], list) else c["tolerance"],
                comparator=c["comparator"],
            )
            for c in raw["criteria"]
        )
        doc = cls(
            experiment_id=raw["experiment_id"],
            inputs=raw["inputs"],
            metrics=raw["metrics"],
            criteria=criteria,
            wall_time_s=raw["wall_time_s"],
            seed=raw["seed"],
        )
        for c_raw, c in zip(raw["criteria"], criteria):
            if bool(c_raw["passed"]) != c.passed:
                raise ValidationError(
                    f"stored verdict for {c.name!r} does not match its own "
                    "metric and tolerance"
                )
        return doc
