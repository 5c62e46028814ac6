"""
Per-arm estimators, studentized statistics and Wald intervals.

Everything here is a function of the streamed sufficient statistics
(count, sum, sum of squares), so estimates never depend on reward order.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy import stats

from errors import DomainError
from stats_core import std_normal_quantile


@dataclass(frozen=True)
class ArmEstimate:
    """Pull count, sample mean and sample standard deviation of one arm"""
    n: int
    mean: float
    sample_std: float

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "mean": self.mean, "std": self.sample_std}


@dataclass(frozen=True)
class WaldInterval:
    lower: float
    upper: float
    level: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        # endpoints count as covered
        return self.lower <= value <= self.upper

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": self.lower, "upper": self.upper, "level": self.level}


def arm_estimate(n: int, sums: float, sumsq: float) -> ArmEstimate:
    """
    Estimate from sufficient statistics.

    The unbiased variance (sumsq - n mean^2) / (n - 1) is clamped at zero to
    absorb cancellation on constant rewards; a single pull reports std 1.
    """
    n = int(n)
    if n < 1:
        raise DomainError(f"an estimate needs at least one pull, got n={n}")
    mean = sums / n
    if n == 1:
        return ArmEstimate(n=1, mean=mean, sample_std=1.0)
    variance = (sumsq - n * mean * mean) / (n - 1)
    return ArmEstimate(n=n, mean=mean, sample_std=math.sqrt(max(variance, 0.0)))


def studentized(est: ArmEstimate, mu_true: float) -> float:
    """
    sqrt(n) (mean - mu_true) / std.

    A zero std yields 0 when the mean is exact and a signed infinity
    otherwise.
    """
    diff = est.mean - mu_true
    if est.sample_std == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return math.sqrt(est.n) * diff / est.sample_std


def wald_ci(est: ArmEstimate, alpha: float) -> WaldInterval:
    """mean -/+ Phi^-1(1 - alpha/2) std / sqrt(n)"""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    z = std_normal_quantile(1.0 - alpha / 2.0)
    half_width = z * est.sample_std / math.sqrt(est.n)
    return WaldInterval(lower=est.mean - half_width, upper=est.mean + half_width, level=1.0 - alpha)


def coverage_tally(intervals: Sequence[WaldInterval], truths: Sequence[float]) -> float:
    """Fraction of intervals that contain their truth"""
    if len(intervals) != len(truths):
        raise DomainError(f"{len(intervals)} intervals but {len(truths)} truths")
    if not intervals:
        raise DomainError("coverage of an empty set of intervals is undefined")
    hits = sum(1 for ci, mu in zip(intervals, truths) if ci.contains(mu))
    return hits / len(intervals)


def ks_against_normal(statistics: Sequence[float]) -> Tuple[float, float]:
    """
    One-sample Kolmogorov-Smirnov test of studentized statistics against N(0, 1).

    Infinite values (degenerate zero-variance arms) are kept: they sit in the
    extreme tails and count against normality.
    """
    values = np.asarray(statistics, dtype=np.float64)
    if values.size == 0:
        raise DomainError("KS test needs at least one statistic")
    result = stats.kstest(values, "norm")
    return float(result.statistic), float(result.pvalue)
