"""
Gaussian K-armed bandit environment with unit-variance noise.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from errors import DomainError
from stats_core import RngStream


@dataclass(frozen=True)
class BanditInstance:
    """Ground truth of a Gaussian bandit: means and the quantities derived from them"""
    means: Tuple[float, ...]
    mu_star: float
    optimal_set: Tuple[int, ...]
    gaps: Dict[int, float] = field(default_factory=dict)

    @property
    def n_arms(self) -> int:
        return len(self.means)

    @property
    def m(self) -> int:
        return len(self.optimal_set)

    def is_optimal(self, arm: int) -> bool:
        return arm in self.optimal_set

    def gap_vector(self) -> np.ndarray:
        """Per-arm gaps with zeros on the optimal set"""
        return np.array([self.gaps.get(a, 0.0) for a in range(self.n_arms)], dtype=np.float64)

    def regret_of_counts(self, counts: Sequence[int]) -> float:
        """Sum over suboptimal arms of gap times pull count"""
        return math.fsum(gap * counts[a] for a, gap in self.gaps.items())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "means": list(self.means),
            "mu_star": self.mu_star,
            "optimal_set": list(self.optimal_set),
            "m": self.m,
            "gaps": {str(a): g for a, g in sorted(self.gaps.items())},
        }


def make_instance(means: Sequence[float]) -> BanditInstance:
    """
    Build an instance from arm means.

    Ties for the optimal set use exact float equality: near-ties are
    distinct arms, because the multiplicity m changes the stability target.
    """
    values: List[float] = []
    for value in means:
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise DomainError(f"arm means must be real numbers, got {value!r}")
        if not math.isfinite(value):
            raise DomainError(f"arm means must be finite, got {value}")
        values.append(value)
    if len(values) < 2:
        raise DomainError(f"a bandit needs at least 2 arms, got {len(values)}")

    mu_star = max(values)
    optimal_set = tuple(a for a, mu in enumerate(values) if mu == mu_star)
    gaps = {a: mu_star - mu for a, mu in enumerate(values) if mu != mu_star}
    return BanditInstance(means=tuple(values), mu_star=mu_star, optimal_set=optimal_set, gaps=gaps)


def pull(instance: BanditInstance, arm: int, rng: RngStream) -> float:
    """Reward mu_arm + Z with Z ~ N(0, 1); consumes one draw of rng"""
    if not 0 <= arm < instance.n_arms:
        raise DomainError(f"arm {arm} out of range for K={instance.n_arms}")
    return instance.means[arm] + rng.standard_normal()
