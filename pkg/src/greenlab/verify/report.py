"""Suite reports: named contracts plus measurements, serialized as deterministic JSON."""
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def jsonable(obj):
    """Plain JSON types; non-finite floats become strings so the output stays standard JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


@dataclass
class SuiteReport:
    suite: str
    contracts: dict = field(default_factory=dict)
    measurements: dict = field(default_factory=dict)
    aborted: Optional[str] = None
    plan: dict = field(default_factory=dict)

    def add(self, name, passed, value=None, bound=None, detail=None):
        self.contracts[name] = {"passed": bool(passed), "value": value, "bound": bound, "detail": detail}
        return bool(passed)

    @property
    def passed(self):
        return self.aborted is None and all(c["passed"] for c in self.contracts.values())

    @property
    def failures(self):
        out = [k for k, c in self.contracts.items() if not c["passed"]]
        return ([f"aborted: {self.aborted}"] if self.aborted else []) + out

    def to_dict(self):
        return jsonable({"suite": self.suite, "passed": self.passed, "aborted": self.aborted,
                         "contracts": self.contracts, "measurements": self.measurements, "plan": self.plan})

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{self.suite}.json")
        with open(path, "w") as fh:
            fh.write(self.to_json())
        return path

    @classmethod
    def from_dict(cls, d):
        return cls(d["suite"], d.get("contracts", {}), d.get("measurements", {}), d.get("aborted"),
                   d.get("plan", {}))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def merge_reports(reports):
    """Summary over reports; independent of the order they are given in."""
    reports = sorted(reports, key=lambda r: r.suite)
    return jsonable({"passed": all(r.passed for r in reports),
                     "suites": {r.suite: {"passed": r.passed, "aborted": r.aborted,
                                          "failures": r.failures,
                                          "contracts": {k: c["passed"] for k, c in sorted(r.contracts.items())}}
                                for r in reports}})
