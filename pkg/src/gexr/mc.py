"""Monte Carlo bookkeeping: estimates, batch-means errors, extrapolation.

``Estimate`` is the universal return type of the estimators: a point value
with a batch-means standard error, replication count and 95% confidence
interval.  ``ExtrapolationSchedule`` drives the domain-growth /
grid-refinement limits; a plateau is declared when consecutive level
estimates agree within max(relative stop rule, twice the combined stderr).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = ["Estimate", "ExtrapolationSchedule", "combine_stderr", "plateau_status"]

MIN_BATCHES = 30


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n_reps: int
    meta: dict = field(default_factory=dict)

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.value - 1.96 * self.stderr, self.value + 1.96 * self.stderr)

    @staticmethod
    def from_samples(samples: np.ndarray, meta: dict | None = None) -> "Estimate":
        """Point estimate with a batch-means standard error (>= 30 batches)."""
        x = np.asarray(samples, dtype=float).reshape(-1)
        n = len(x)
        finite = np.isfinite(x)
        n_bad = int(n - finite.sum())
        x = np.where(finite, x, 0.0)
        mean = float(x.mean()) if n else math.nan
        n_batches = min(max(MIN_BATCHES, int(math.sqrt(n))), max(n, 1))
        if n >= n_batches and n_batches > 1:
            trimmed = x[: (n // n_batches) * n_batches]
            bm = trimmed.reshape(n_batches, -1).mean(axis=1)
            stderr = float(bm.std(ddof=1) / math.sqrt(n_batches))
        elif n > 1:
            stderr = float(x.std(ddof=1) / math.sqrt(n))
        else:
            stderr = math.nan
        meta = dict(meta or {})
        if n_bad:
            meta["overflow_count"] = n_bad
        return Estimate(mean, stderr, n, meta)

    def scaled(self, factor: float, **extra_meta) -> "Estimate":
        return Estimate(
            self.value * factor,
            abs(factor) * self.stderr,
            self.n_reps,
            {**self.meta, **extra_meta},
        )


def combine_stderr(*estimates: Estimate) -> float:
    """Standard error of a sum/difference of independent estimates."""
    return math.sqrt(sum(e.stderr**2 for e in estimates))


@dataclass(frozen=True)
class ExtrapolationSchedule:
    """Growth/refinement schedule for limits in domain size and grid step."""

    domain_sizes: tuple[float, ...] = (2.0, 4.0, 8.0, 16.0)
    grid_steps: tuple[float, ...] = (1 / 16, 1 / 32, 1 / 64)
    stop_rule: float = 0.01

    def __post_init__(self):
        if len(self.domain_sizes) < 3 or len(self.grid_steps) < 1:
            raise ValueError("schedule needs >= 3 domain sizes and >= 1 grid step")
        if list(self.domain_sizes) != sorted(self.domain_sizes):
            raise ValueError("domain sizes must be increasing")
        if list(self.grid_steps) != sorted(self.grid_steps, reverse=True):
            raise ValueError("grid steps must be decreasing")

    @property
    def finest_step(self) -> float:
        return self.grid_steps[-1]


def plateau_status(levels: Sequence[Estimate], stop_rule: float) -> str:
    """Classify a level trace: "plateau", "diverging" or "no-plateau".

    Plateau: the last two levels agree within max(stop_rule * |value|,
    2 * combined stderr).  Diverging: monotone growth with the last jump
    exceeding the tolerance.
    """
    if len(levels) < 2:
        return "no-plateau"
    a, b = levels[-2], levels[-1]
    tol = max(stop_rule * abs(b.value), 2.0 * combine_stderr(a, b))
    if abs(b.value - a.value) <= tol:
        return "plateau"
    vals = [e.value for e in levels]
    if all(y > x for x, y in zip(vals, vals[1:])):
        return "diverging"
    return "no-plateau"
