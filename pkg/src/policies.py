"""
Gaussian Thompson sampling index policies.

Three modes share one index rule: draw theta_a ~ N(center_a, sigma_A / N_a)
for every arm and play the argmax.

- vanilla:            center = mean, sigma_A = 1
- variance_inflated:  center = mean, sigma_A = sigma(T) > 1
- mean_bonus:         center = mean + sqrt(2 beta(T) log T / N_a), sigma_A = 1

sigma_A and beta_A are frozen at the horizon T for the whole run.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from errors import ConfigError, DomainError
from lab_logger import get_logger
from stats_core import ReplicationStreams, std_normal_cdf, upper_tail_quantile

_log = get_logger()


class PolicyMode(str, Enum):
    """Algorithm options A, B and C"""
    VANILLA = "vanilla"
    VARIANCE_INFLATED = "variance_inflated"
    MEAN_BONUS = "mean_bonus"

    @classmethod
    def parse(cls, value: str) -> "PolicyMode":
        aliases = {
            "a": cls.VANILLA, "vanilla": cls.VANILLA, "vanillats": cls.VANILLA,
            "b": cls.VARIANCE_INFLATED, "variance_inflated": cls.VARIANCE_INFLATED,
            "varianceinflatedts": cls.VARIANCE_INFLATED,
            "c": cls.MEAN_BONUS, "mean_bonus": cls.MEAN_BONUS, "meanbonusts": cls.MEAN_BONUS,
        }
        key = str(value).strip().lower()
        if key not in aliases:
            raise ConfigError(f"unknown policy mode {value!r}")
        return aliases[key]

    @property
    def is_optimistic(self) -> bool:
        return self is not PolicyMode.VANILLA


@dataclass(frozen=True)
class Schedule:
    """
    A horizon-dependent parameter.

    ``constant`` returns ``value``; ``loglog`` returns
    max(floor, (log log T)^power).
    """
    kind: str
    value: float = 1.0
    power: float = 2.0
    floor: float = 1.0

    def __post_init__(self):
        if self.kind == "constant":
            if not (math.isfinite(self.value) and self.value >= 0.0):
                raise ConfigError(f"constant schedule needs a finite value >= 0, got {self.value}")
        elif self.kind == "loglog":
            if not (math.isfinite(self.power) and self.power > 0.0):
                raise ConfigError(f"loglog schedule needs a finite power > 0, got {self.power}")
            if not (math.isfinite(self.floor) and self.floor >= 1.0):
                raise ConfigError(f"loglog schedule needs a finite floor >= 1, got {self.floor}")
        else:
            raise ConfigError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls(kind="constant", value=float(value))

    @classmethod
    def loglog(cls, power: float = 2.0, floor: float = 1.0) -> "Schedule":
        return cls(kind="loglog", power=float(power), floor=float(floor))

    def evaluate(self, horizon: int) -> float:
        if self.kind == "constant":
            return self.value
        if horizon < 3:
            return self.floor
        return max(self.floor, math.log(math.log(horizon)) ** self.power)

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "loglog", "power": self.power, "floor": self.floor}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Schedule":
        if not isinstance(data, dict):
            raise ConfigError(f"schedule block must be an object, got {data!r}")
        kind = data.get("kind")
        allowed = {"constant": {"kind", "value"}, "loglog": {"kind", "power", "floor"}}
        if kind not in allowed:
            raise ConfigError(f"unknown schedule kind {kind!r}")
        unknown = set(data) - allowed[kind]
        if unknown:
            raise ConfigError(f"unknown keys in {kind} schedule: {sorted(unknown)}")
        try:
            if kind == "constant":
                return cls.constant(float(data["value"]))
            return cls.loglog(float(data.get("power", 2.0)), float(data.get("floor", 1.0)))
        except KeyError as exc:
            raise ConfigError(f"{kind} schedule is missing {exc}")
        except (TypeError, ValueError):
            raise ConfigError(f"schedule values must be numbers: {data!r}")


DEFAULT_SIGMA_SCHEDULE = Schedule.loglog(power=2.0, floor=4.0)
DEFAULT_BETA_SCHEDULE = Schedule.loglog(power=2.0, floor=1.0)


@dataclass
class PolicyState:
    """Sufficient statistics and frozen parameters of one running policy"""
    mode: PolicyMode
    n_arms: int
    horizon: int
    sigma_A: float
    beta_A: float
    counts: np.ndarray = field(repr=False)
    sums: np.ndarray = field(repr=False)
    sumsq: np.ndarray = field(repr=False)
    t: int = 0

    @property
    def log_horizon(self) -> float:
        return math.log(self.horizon)

    def empirical_means(self) -> np.ndarray:
        return self.sums / self.counts

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "n_arms": self.n_arms,
            "horizon": self.horizon,
            "sigma_A": self.sigma_A,
            "beta_A": self.beta_A,
            "counts": self.counts.tolist(),
            "t": self.t,
        }


def init_policy(
    mode: PolicyMode,
    n_arms: int,
    horizon: int,
    sigma_schedule: Schedule = DEFAULT_SIGMA_SCHEDULE,
    beta_schedule: Schedule = DEFAULT_BETA_SCHEDULE
) -> PolicyState:
    """
    Fresh policy state at t = 0 with sigma_A / beta_A frozen at the horizon.

    Option A ignores both schedules. Option B with sigma_A = 1 and Option C
    with beta_A = 0 are accepted (they reduce to Option A) but logged.
    """
    if n_arms < 2:
        raise DomainError(f"a policy needs at least 2 arms, got {n_arms}")
    if horizon <= n_arms:
        raise DomainError(f"horizon T={horizon} must exceed the number of arms K={n_arms}")

    sigma_A, beta_A = 1.0, 0.0
    if mode is PolicyMode.VARIANCE_INFLATED:
        sigma_A = sigma_schedule.evaluate(horizon)
        if sigma_A < 1.0:
            raise DomainError(f"variance inflation needs sigma_A >= 1, got {sigma_A}")
        if sigma_A == 1.0:
            _log.warning("init_policy", "variance-inflated policy with sigma_A = 1 reduces to vanilla TS")
    elif mode is PolicyMode.MEAN_BONUS:
        beta_A = beta_schedule.evaluate(horizon)
        if beta_A < 0.0:
            raise DomainError(f"mean bonus needs beta_A >= 0, got {beta_A}")
        if beta_A == 0.0:
            _log.warning("init_policy", "mean-bonus policy with beta_A = 0 reduces to vanilla TS")

    return PolicyState(
        mode=mode,
        n_arms=n_arms,
        horizon=horizon,
        sigma_A=sigma_A,
        beta_A=beta_A,
        counts=np.zeros(n_arms, dtype=np.int64),
        sums=np.zeros(n_arms, dtype=np.float64),
        sumsq=np.zeros(n_arms, dtype=np.float64),
    )


def bonus(beta_A: float, horizon: int, n: int) -> float:
    """B = sqrt(2 beta_A log T / n)"""
    if n < 1:
        raise DomainError(f"bonus needs a pull count n >= 1, got {n}")
    if horizon < 2:
        raise DomainError(f"bonus needs T >= 2, got {horizon}")
    return math.sqrt(2.0 * beta_A * math.log(horizon) / n)


def index_values(
    mode: PolicyMode,
    sums: np.ndarray,
    counts: np.ndarray,
    z: np.ndarray,
    sigma_A: float,
    beta_A: float,
    log_horizon: float
) -> np.ndarray:
    """
    Randomized indices center + sqrt(sigma_A / N) * z.

    Elementwise over arrays of any shape, so a single replication and a
    stacked batch of replications produce bitwise-identical indices.
    """
    centers = sums / counts
    if mode is PolicyMode.MEAN_BONUS:
        centers = centers + np.sqrt(2.0 * beta_A * log_horizon / counts)
    return centers + np.sqrt(sigma_A / counts) * z


def decomposed_mean_bonus_indices(
    sums: np.ndarray,
    counts: np.ndarray,
    z: np.ndarray,
    beta_A: float,
    log_horizon: float
) -> np.ndarray:
    """Mean-bonus indices written as vanilla draw plus bonus"""
    vanilla = sums / counts + np.sqrt(1.0 / counts) * z
    return vanilla + np.sqrt(2.0 * beta_A * log_horizon / counts)


def select_arm(state: PolicyState, streams: ReplicationStreams) -> int:
    """
    Next arm to play.

    The first K rounds pull arms 0..K-1 in order without consuming
    randomness. Afterwards one standard normal per arm is drawn from the
    arm's index lane; ties go to the lowest index.
    """
    if state.t < state.n_arms:
        return state.t
    z = streams.index_draws()
    theta = index_values(
        state.mode, state.sums, state.counts, z,
        state.sigma_A, state.beta_A, state.log_horizon
    )
    return int(np.argmax(theta))


def update(state: PolicyState, arm: int, reward: float) -> PolicyState:
    if not 0 <= arm < state.n_arms:
        raise DomainError(f"arm {arm} out of range for K={state.n_arms}")
    state.counts[arm] += 1
    state.sums[arm] += reward
    state.sumsq[arm] += reward * reward
    state.t += 1
    return state


def optimistic_tail_prob(mu_hat: float, c: float, n: int, sigma_A: float) -> float:
    """P(mu_hat + sqrt(sigma_A / n) Z >= c)"""
    if n < 1 or sigma_A <= 0.0:
        raise DomainError("tail probability needs n >= 1 and sigma_A > 0")
    return 1.0 - std_normal_cdf((c - mu_hat) * math.sqrt(n / sigma_A))


def posterior_quantile_bonus(beta_A: float, horizon: int, n: int) -> float:
    """Upper T^-beta posterior quantile shift of N(mean, 1/n), the Bayes-UCB reading of the bonus"""
    if n < 1 or horizon < 2:
        raise DomainError("quantile bonus needs n >= 1 and T >= 2")
    tail = math.exp(-beta_A * math.log(horizon))
    if not 0.0 < tail < 1.0:
        raise DomainError(f"T^-beta = {tail} leaves (0, 1); choose 0 < beta log T < 745")
    return upper_tail_quantile(tail) / math.sqrt(n)


def growth_diagnostics(mode: PolicyMode, c_A: float, horizon: int) -> Optional[Dict[str, float]]:
    """
    Ratios tracked by the growth conditions on sigma_A / beta_A.

    The first should diverge and the second vanish as T grows. Returns None
    for vanilla TS, which has no schedule.
    """
    if mode is PolicyMode.VANILLA or horizon < 16:
        return None
    log_t = math.log(horizon)
    if mode is PolicyMode.VARIANCE_INFLATED:
        return {
            "c_over_loglog": c_A / math.log(log_t),
            "c_scale_over_T": c_A * log_t ** 2 / horizon,
        }
    return {
        "c_over_loglog": c_A / math.log(log_t),
        "c_scale_over_T": c_A * log_t / horizon,
    }
