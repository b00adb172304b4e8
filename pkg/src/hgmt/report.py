"""Verification reports with a fixed JSON layout."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1


def _clean(obj):
    """Make numpy values JSON-friendly; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class VerificationReport:
    lemma_id: str
    params: dict = field(default_factory=dict)
    violations: int = 0
    estimates: list = field(default_factory=list)
    hypotheses_met: bool = True
    criteria_met: bool = True
    notes: list = field(default_factory=list)
    runtime_ms: int = 0

    @property
    def pass_(self) -> bool:
        return self.violations == 0 and self.criteria_met

    def add(self, name: str, value, ci=None, **extra):
        entry = {"name": name, "value": value}
        if ci is not None:
            entry["ci"] = ci
        entry.update(extra)
        self.estimates.append(entry)

    def get(self, name: str):
        for e in self.estimates:
            if e["name"] == name:
                return e["value"]
        raise KeyError(name)

    def to_dict(self) -> dict:
        return _clean({
            "schema_version": SCHEMA_VERSION,
            "lemma_id": self.lemma_id,
            "params": self.params,
            "violations": self.violations,
            "estimates": self.estimates,
            "hypotheses_met": self.hypotheses_met,
            "criteria_met": self.criteria_met,
            "pass": self.pass_,
            "notes": self.notes,
            "runtime_ms": self.runtime_ms,
        })

    def to_json(self, runtime: bool = True) -> str:
        d = self.to_dict()
        if not runtime:
            d.pop("runtime_ms")
        return json.dumps(d, sort_keys=True, indent=2)
