from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class Check:
    name: str
    passed: bool
    witness: float | None = None
    message: str = ""

    def to_dict(self):
        w = self.witness
        if w is not None and not math.isfinite(w):
            w = str(w)
        return {"name": self.name, "passed": self.passed, "witness": w, "message": self.message}


@dataclass
class Report:
    """Ordered list of named pass/fail checks with witness values."""

    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def add(self, name, passed, witness=None, message=""):
        self.checks.append(Check(name, bool(passed), None if witness is None else float(witness), message))

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "warnings": list(self.warnings),
        }


class ValidationReport(Report):
    pass


class AdmissibilityReport(Report):
    sup_theta: float = math.nan
    inf_theta: float = math.nan

    def to_dict(self):
        d = super().to_dict()
        d["sup_theta"] = self.sup_theta if math.isfinite(self.sup_theta) else str(self.sup_theta)
        d["inf_theta"] = self.inf_theta if math.isfinite(self.inf_theta) else str(self.inf_theta)
        return d
