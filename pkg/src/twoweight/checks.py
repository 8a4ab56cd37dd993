"""Inequality check records shared by the verification suites."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


def _num(v):
    if isinstance(v, float) and math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return v


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    constant: float | str | None = None
    passed: bool = True
    witness: dict = field(default_factory=dict)

    @classmethod
    def leq(cls, name, lhs, rhs, constant=None, witness=None, rtol: float = 0.0) -> "Check":
        lhs, rhs = float(lhs), float(rhs)
        ok = lhs <= rhs + rtol * abs(rhs)
        return cls(name, lhs, rhs, constant, bool(ok), witness or {})

    def to_json(self) -> dict:
        return {"name": self.name, "lhs": _num(self.lhs), "rhs": _num(self.rhs),
                "constant": _num(self.constant), "pass": self.passed, "witness": self.witness}


def all_passed(checks) -> bool:
    return all(c.passed for c in checks)
