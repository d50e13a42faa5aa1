"""Small Monte-Carlo summary helpers shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MeanEstimate:
    """Sample mean with spread; ``std`` uses the unbiased (ddof=1) estimator."""

    mean: float
    std: float
    standard_error: float
    samples: int

    @classmethod
    def from_samples(cls, values) -> "MeanEstimate":
        values = np.asarray(values, dtype=float).ravel()
        n = values.size
        if n == 0:
            raise ValueError("no samples")
        mean = float(values.mean())
        std = float(values.std(ddof=1)) if n > 1 else 0.0
        return cls(mean, std, std / math.sqrt(n), n)

    @classmethod
    def from_moments(cls, count: int, mean: float, m2: float) -> "MeanEstimate":
        std = math.sqrt(m2 / (count - 1)) if count > 1 else 0.0
        return cls(mean, std, std / math.sqrt(count), count)

    def moments(self) -> tuple[int, float, float]:
        """(count, mean, sum of squared deviations) for merging."""
        return self.samples, self.mean, self.std**2 * (self.samples - 1)

    def merge(self, other: "MeanEstimate") -> "MeanEstimate":
        # Chan et al. pairwise update; order-independent up to rounding
        n_a, mean_a, m2_a = self.moments()
        n_b, mean_b, m2_b = other.moments()
        n = n_a + n_b
        delta = mean_b - mean_a
        mean = mean_a + delta * n_b / n
        m2 = m2_a + m2_b + delta**2 * n_a * n_b / n
        return MeanEstimate.from_moments(n, mean, m2)

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "standard_error": self.standard_error,
            "samples": self.samples,
        }
