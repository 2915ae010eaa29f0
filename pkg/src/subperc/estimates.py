from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EstimateWithCI:
    """Monte Carlo mean with its standard error."""

    value: float
    std_error: float
    replications: int

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("standard error must be nonnegative")

    @classmethod
    def from_samples(cls, values) -> "EstimateWithCI":
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("no samples")
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return cls(float(v.mean()), se, int(v.size))

    def within(self, reference: float, k: float = 3.0) -> bool:
        return abs(self.value - reference) <= k * self.std_error

    def joint_se(self, other: "EstimateWithCI") -> float:
        return math.hypot(self.std_error, other.std_error)

    def leq(self, other: "EstimateWithCI", k: float = 3.0) -> bool:
        """``self <= other`` up to ``k`` joint standard errors."""
        return self.value <= other.value + k * self.joint_se(other)
