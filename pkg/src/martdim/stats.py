"""z-scored across-path checks and exact-identity checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_Z = 3.0


@dataclass
class StatCheck:
    """Across-path mean of ``samples`` compared with ``expected``.

    When every sample is identical the standard error is zero; the check then
    passes only if the mean equals the expected value (to 1e-12 absolute).
    """

    name: str
    statistic: float
    expected: float
    se: float
    z: float
    threshold: float
    M: int

    @property
    def passed(self) -> bool:
        return abs(self.z) <= self.threshold

    def to_json(self) -> dict:
        return {"name": self.name, "kind": "statistical", "statistic": self.statistic,
                "expected": self.expected, "se": self.se, "z": self.z,
                "threshold": self.threshold, "M": self.M, "passed": self.passed}


def stat_check(name: str, samples, expected: float, threshold: float = DEFAULT_Z) -> StatCheck:
    x = np.asarray(samples, dtype=np.float64).ravel()
    M = x.size
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / np.sqrt(M)) if M > 1 else 0.0
    gap = mean - expected
    if se > 0:
        z = gap / se
    else:
        z = 0.0 if abs(gap) <= 1e-12 else float(np.copysign(np.inf, gap))
    return StatCheck(name, mean, float(expected), se, float(z), float(threshold), M)


@dataclass
class ExactCheck:
    """A deterministic identity: ``value`` must not exceed ``bound``."""

    name: str
    value: float
    bound: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.bound)

    def to_json(self) -> dict:
        return {"name": self.name, "kind": "exact", "value": self.value, "bound": self.bound,
                "detail": self.detail, "passed": self.passed}


def exact_check(name: str, value, bound: float, detail: str = "") -> ExactCheck:
    return ExactCheck(name, float(value), float(bound), detail)


def bool_check(name: str, ok: bool, detail: str = "") -> ExactCheck:
    """Exact check for a yes/no fact (value 0 when it holds, 1 otherwise)."""
    return ExactCheck(name, 0.0 if ok else 1.0, 0.0, detail)
