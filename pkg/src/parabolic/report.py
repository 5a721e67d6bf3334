"""Check records and reports shared by every engine.

A check passes when ``value - bound <= tolerance``. Equality-type checks
store the residual as ``value`` with ``bound = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float = 0.0
    tolerance: float = 0.0
    reference: str = ""

    @property
    def residual(self) -> float:
        return max(0.0, self.value - self.bound)

    @property
    def passed(self) -> bool:
        return bool(self.value - self.bound <= self.tolerance)

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "reference": self.reference,
            "value": _clean(float(self.value)),
            "bound": _clean(float(self.bound)),
            "residual": _clean(float(self.residual)),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
        }


def inequality(name: str, lhs: float, rhs: float, tol: float = 0.0, reference: str = "") -> Check:
    return Check(name, float(lhs), float(rhs), float(tol), reference)


def residual(name: str, value: float, tol: float, reference: str = "") -> Check:
    return Check(name, float(value), 0.0, float(tol), reference)


@dataclass
class Report:
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def add(self, *checks: Check) -> "Report":
        self.checks.extend(checks)
        return self

    def extend(self, other: "Report", prefix: str = "") -> "Report":
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.value, c.bound, c.tolerance, c.reference))
        for k, v in other.tables.items():
            self.tables[prefix + k] = v
        self.notes.extend(other.notes)
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "checks": [c.to_record() for c in self.checks],
            "tables": self.tables,
            "notes": list(self.notes),
            "all_pass": self.passed,
        }
