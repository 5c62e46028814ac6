"""
Special functions, tail bounds and random streams shared by the lab.

Gaussian functions wrap ``scipy.special`` (``ndtr`` keeps full relative
accuracy deep in the lower tail); random draws come from counter-based Philox
generators keyed by (master_seed, stream_id, substream_id).
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy import special

from errors import DomainError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Substream layout inside one replication.
REWARD_LANE = 0
INDEX_LANE_BASE = 1

_UINT64_MAX = 2**64 - 1


def std_normal_pdf(x: float) -> float:
    """phi(x) = exp(-x^2/2) / sqrt(2 pi)"""
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def std_normal_cdf(x: float) -> float:
    """Phi(x), accurate to a few ulps over the whole real line"""
    return float(special.ndtr(x))


def std_normal_quantile(p: float) -> float:
    """
    Inverse of Phi.

    Starts from ``scipy.special.ndtri`` and applies one Newton step on
    ``ndtr`` so that Phi(quantile(p)) reproduces p to ~1e-15.
    """
    if not (0.0 < p < 1.0) or math.isnan(p):
        raise DomainError(f"quantile requires p in (0, 1), got {p}")
    x = float(special.ndtri(p))
    density = std_normal_pdf(x)
    if density > 0.0:
        x -= (std_normal_cdf(x) - p) / density
    return x


def upper_tail_quantile(q: float) -> float:
    """x with 1 - Phi(x) = q, without forming 1 - q (keeps tiny q exact)"""
    return -std_normal_quantile(q)


def mills_bracket(x: float) -> Tuple[float, float]:
    """
    Mills-ratio bracket for the upper tail.

    Returns (x phi(x) / (1 + x^2), phi(x) / x), which contains Phi(-x) for
    every x > 0.
    """
    if not x > 0.0:
        raise DomainError(f"Mills bracket requires x > 0, got {x}")
    phi = std_normal_pdf(x)
    return x * phi / (1.0 + x * x), phi / x


def crude_tail_bound(x: float) -> float:
    """exp(-x^2/2), an upper bound on Phi(-x) for x >= 0"""
    if x < 0.0:
        raise DomainError(f"crude tail bound requires x >= 0, got {x}")
    return math.exp(-0.5 * x * x)


def sqrt_inequality_gaps(x: float) -> Tuple[float, Optional[float]]:
    """
    Slack in the two square-root inequalities on [0, 1].

    Returns ((1 - x/4) - 1/sqrt(1+x), 1/sqrt(1-x) - (1 + x/2)); both are
    nonnegative when the inequalities hold. The second entry is None at
    x = 1 where 1/sqrt(1-x) is undefined.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"square-root inequalities live on [0, 1], got {x}")
    upper = (1.0 - x / 4.0) - 1.0 / math.sqrt(1.0 + x)
    lower = None if x >= 1.0 else 1.0 / math.sqrt(1.0 - x) - (1.0 + x / 2.0)
    return upper, lower


def _check_u64(name: str, value: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if not 0 <= value <= _UINT64_MAX:
        raise DomainError(f"{name} must fit in an unsigned 64-bit integer, got {value}")
    return value


@dataclass(frozen=True)
class RngStream:
    """
    One reproducible lane of random numbers.

    The triple (master_seed, stream_id, substream_id) fully determines the
    sequence. Streams are single-owner: never sample one from two threads.
    """
    master_seed: int
    stream_id: int = 0
    substream_id: int = 0
    _generator: Optional[np.random.Generator] = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        object.__setattr__(self, "master_seed", _check_u64("master_seed", self.master_seed))
        object.__setattr__(self, "stream_id", _check_u64("stream_id", self.stream_id))
        object.__setattr__(self, "substream_id", _check_u64("substream_id", self.substream_id))

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            seed_seq = np.random.SeedSequence(
                self.master_seed, spawn_key=(self.stream_id, self.substream_id)
            )
            object.__setattr__(self, "_generator", np.random.Generator(np.random.Philox(seed_seq)))
        return self._generator

    def standard_normal(self, size: Optional[int] = None) -> Union[float, np.ndarray]:
        if size is None:
            return float(self.generator.standard_normal())
        return self.generator.standard_normal(size)

    def open_uniform(self, size: Optional[int] = None) -> Union[float, np.ndarray]:
        """Uniform draws on (0, 1]"""
        if size is None:
            return 1.0 - float(self.generator.random())
        return 1.0 - self.generator.random(size)

    def lineage(self) -> Dict[str, int]:
        return {
            "master_seed": self.master_seed,
            "stream_id": self.stream_id,
            "substream_id": self.substream_id,
        }


class ReplicationStreams:
    """
    All lanes used by one replication.

    Substream 0 carries reward noise (one draw per round); substream 1 + a
    carries the index noise of arm a (one draw per round once every arm has
    been pulled).
    """

    def __init__(self, master_seed: int, rep_id: int, n_arms: int):
        self.master_seed = master_seed
        self.rep_id = rep_id
        self.reward = RngStream(master_seed, rep_id, REWARD_LANE)
        self.index = [RngStream(master_seed, rep_id, INDEX_LANE_BASE + a) for a in range(n_arms)]

    def index_draws(self) -> np.ndarray:
        """One standard normal per arm, consumed in arm order"""
        return np.array([lane.standard_normal() for lane in self.index], dtype=np.float64)


def sample_std_normal(rng: RngStream) -> float:
    return rng.standard_normal()


def sample_geometric(p: float, rng: RngStream) -> int:
    """
    Geometric draw on {1, 2, ...} with success probability p.

    Inversion ceil(log U / log(1 - p)) is exact in distribution and O(1)
    even for tiny p.
    """
    if not 0.0 < p <= 1.0:
        raise DomainError(f"geometric success probability must lie in (0, 1], got {p}")
    u = rng.open_uniform()
    if p == 1.0:
        return 1
    draw = math.ceil(math.log(u) / math.log1p(-p))
    return max(1, int(draw))


def geometric_array(p: np.ndarray, rng: RngStream) -> np.ndarray:
    """Vectorized geometric draws as float64 (values may exceed int64)"""
    p = np.asarray(p, dtype=np.float64)
    if np.any(~(p > 0.0)) or np.any(p > 1.0):
        raise DomainError("geometric success probabilities must lie in (0, 1]")
    u = rng.open_uniform(p.size).reshape(p.shape)
    with np.errstate(divide="ignore"):
        draws = np.ceil(np.log(u) / np.log1p(-p))
    draws = np.where(p >= 1.0, 1.0, draws)
    return np.maximum(draws, 1.0)
