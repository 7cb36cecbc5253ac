"""Structured results for certificate and bound checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

__all__ = ["Violation", "Report", "jsonable"]

# scalars mostly; the CLI also tucks row tables and child reports in here
Metric = object


Number = Union[Fraction, float]


@dataclass(frozen=True)
class Violation:
    """One broken inequality: where, and by how much.  Values are exact
    rationals from symbolic checks or floats from Monte Carlo ones."""

    constraint: str
    lhs: Number
    rhs: Number

    @property
    def slack(self) -> Number:
        return self.rhs - self.lhs


@dataclass
class Report:
    name: str
    passed: bool
    metrics: dict[str, Metric] = field(default_factory=dict)
    violations: tuple[Violation, ...] = ()
    min_slack: Optional[Number] = None


def jsonable(value):
    """Recursively convert report pieces to JSON-safe primitives;
    rationals become canonical 'p/q' strings so nothing is rounded."""
    if isinstance(value, Report):
        return {
            "name": value.name,
            "passed": value.passed,
            "metrics": {k: jsonable(v) for k, v in value.metrics.items()},
            "violations": [jsonable(v) for v in value.violations],
            "min_slack": jsonable(value.min_slack),
        }
    if isinstance(value, Violation):
        return {"constraint": value.constraint, "lhs": jsonable(value.lhs),
                "rhs": jsonable(value.rhs), "slack": jsonable(value.slack)}
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    return value
