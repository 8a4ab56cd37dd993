"""Deterministic JSON reports."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..checks import Check, all_passed

SCHEMA_VERSION = "1.0"


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "+inf" if f > 0 else "-inf"
        return f
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    return v


@dataclass
class Report:
    command: str
    config: dict
    constants: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    timing: dict | None = None

    def add_checks(self, checks, suite: str | None = None):
        for c in checks:
            if suite is not None:
                c = Check(f"{suite}/{c.name}", c.lhs, c.rhs, c.constant, c.passed, c.witness)
            self.checks.append(c)

    @property
    def passed(self) -> bool:
        return all_passed(self.checks)

    def to_json(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "constants": [c.to_json() for c in self.constants],
            "checks": [c.to_json() for c in self.checks],
            "summary": {"checks": len(self.checks),
                        "failed": sum(not c.passed for c in self.checks),
                        "pass": self.passed},
            "tables": self.tables,
        }
        out.update(self.extra)
        if self.timing is not None:
            out["timing"] = self.timing
        return _clean(out)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"
