"""
Stability targets, trajectory diagnostics and the numerical primitives behind
the winner-map and geometric-sum checks.

Winner map: for an interior point x of the simplex, g_i(x) is the probability
that Z_i / sqrt(x_i) is the largest of r independent standard normals,

    g_i(x) = int phi(z) prod_{l != i} Phi((s_i / s_l) z) dz,   s_k = x_k^(-1/2).
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate, special

from bandit_env import BanditInstance
from errors import DomainError
from lab_logger import get_logger
from policies import PolicyMode
from stats_core import RngStream, geometric_array, std_normal_pdf

_log = get_logger()

QUADRATURE_NODES = 256
QUADRATURE_ACCEPT_TOL = 1e-9
MC_CHUNK = 1 << 18
MAX_PERTURB_ARMS = 12


@dataclass(frozen=True)
class StabilityTarget:
    """Deterministic pull-count targets N*_{a,T}"""
    targets: Tuple[float, ...]
    mode: PolicyMode
    horizon: int
    c_A: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "targets": list(self.targets),
            "mode": self.mode.value,
            "horizon": self.horizon,
            "c_A": self.c_A,
        }


def stability_target(
    instance: BanditInstance,
    mode: PolicyMode,
    horizon: int,
    c_A: float
) -> StabilityTarget:
    """
    T/m for optimal arms and 2 c_A log T / gap^2 for the rest.

    c_A is sigma_A for variance inflation and beta_A for the mean bonus.
    Vanilla TS has no such target.
    """
    if mode is PolicyMode.VANILLA:
        raise DomainError("vanilla Thompson sampling has no deterministic stability target")
    if horizon < 3:
        raise DomainError(f"stability targets need T >= 3, got {horizon}")
    if not c_A > 0.0:
        raise DomainError(f"stability targets need c_A > 0, got {c_A}")

    log_t = math.log(horizon)
    targets = []
    for arm in range(instance.n_arms):
        if instance.is_optimal(arm):
            targets.append(horizon / instance.m)
        else:
            targets.append(2.0 * c_A * log_t / instance.gaps[arm] ** 2)
    return StabilityTarget(targets=tuple(targets), mode=mode, horizon=horizon, c_A=c_A)


def stability_ratios(counts_at_T: Sequence[float], target: StabilityTarget) -> List[float]:
    if len(counts_at_T) != len(target.targets):
        raise DomainError(f"{len(counts_at_T)} counts for {len(target.targets)} targets")
    return [float(n) / star for n, star in zip(counts_at_T, target.targets)]


def lyapunov_v(optimal_counts: Sequence[int]) -> float:
    """Squared distance of the optimal arms' pull shares from uniform"""
    counts = np.asarray(optimal_counts, dtype=np.float64)
    if counts.size < 2:
        raise DomainError(f"the Lyapunov function needs m >= 2 arms, got {counts.size}")
    total = counts.sum()
    if total < 1:
        raise DomainError("the Lyapunov function is undefined for all-zero counts")
    shares = counts / total
    return float(np.sum((shares - 1.0 / counts.size) ** 2))


def optimal_share_spread(counts: Sequence[int], optimal_set: Sequence[int]) -> float:
    """max - min share among optimal arms (0 for a single optimal arm)"""
    picked = np.asarray([counts[a] for a in optimal_set], dtype=np.float64)
    total = picked.sum()
    if total <= 0:
        raise DomainError("optimal arms have not been pulled")
    shares = picked / total
    return float(shares.max() - shares.min())


@dataclass(frozen=True)
class SimplexPoint:
    """A point in the open simplex of dimension r"""
    x: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.x)
        object.__setattr__(self, "x", values)
        if len(values) < 2:
            raise DomainError(f"simplex points need r >= 2, got {len(values)}")
        if any(not (v > 0.0) or not math.isfinite(v) for v in values):
            raise DomainError(f"simplex point must lie in the interior: {values}")
        if abs(math.fsum(values) - 1.0) > 1e-12:
            raise DomainError(f"simplex coordinates must sum to 1, got {math.fsum(values)}")

    @classmethod
    def normalized(cls, weights: Sequence[float]) -> "SimplexPoint":
        w = np.asarray(weights, dtype=np.float64)
        if np.any(~(w > 0.0)):
            raise DomainError(f"simplex point must lie in the interior: {list(w)}")
        return cls(tuple(w / w.sum()))

    @property
    def r(self) -> int:
        return len(self.x)

    def array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=np.float64)


@lru_cache(maxsize=8)
def _hermite_rule(node_count: int) -> Tuple[np.ndarray, np.ndarray]:
    # int phi(z) f(z) dz = sum w_k / sqrt(pi) f(sqrt(2) t_k)
    nodes, weights = hermgauss(node_count)
    return math.sqrt(2.0) * nodes, weights / math.sqrt(math.pi)


def _winner_map_hermite(scales: np.ndarray, node_count: int) -> np.ndarray:
    z, w = _hermite_rule(node_count)
    ratio = scales[:, None] / scales[None, :]
    cdf = special.ndtr(ratio[:, :, None] * z[None, None, :])
    idx = np.arange(scales.size)
    cdf[idx, idx, :] = 1.0
    return np.prod(cdf, axis=1) @ w


def _winner_map_adaptive(scales: np.ndarray) -> np.ndarray:
    values = []
    for i in range(scales.size):
        ratio = np.delete(scales[i] / scales, i)

        def integrand(z: float) -> float:
            return std_normal_pdf(z) * float(np.prod(special.ndtr(ratio * z)))

        lower, _ = integrate.quad(integrand, -12.0, 0.0, epsabs=1e-14, epsrel=1e-12, limit=400)
        upper, _ = integrate.quad(integrand, 0.0, 12.0, epsabs=1e-14, epsrel=1e-12, limit=400)
        values.append(lower + upper)
    return np.asarray(values)


def winner_map_quadrature(x: SimplexPoint, node_count: int = QUADRATURE_NODES) -> np.ndarray:
    """
    Winner probabilities by one-dimensional quadrature.

    Gauss-Hermite with ``node_count`` nodes is accepted when doubling the
    node count moves no coordinate by more than 1e-9; otherwise (very
    unbalanced points make the integrand nearly a step) adaptive quadrature
    on [-12, 12] takes over.
    """
    if node_count < 64:
        raise DomainError(f"winner-map quadrature needs at least 64 nodes, got {node_count}")
    scales = 1.0 / np.sqrt(x.array())
    coarse = _winner_map_hermite(scales, node_count)
    fine = _winner_map_hermite(scales, 2 * node_count)
    if np.max(np.abs(fine - coarse)) <= QUADRATURE_ACCEPT_TOL:
        return fine
    _log.debug(
        "winner_map_quadrature",
        "Hermite rule not converged, switching to adaptive quadrature",
        details={"x": list(x.x), "delta": float(np.max(np.abs(fine - coarse)))}
    )
    return _winner_map_adaptive(scales)


def _argmax_counts(values: np.ndarray, r: int) -> np.ndarray:
    return np.bincount(np.argmax(values, axis=1), minlength=r)


def winner_map_mc(x: SimplexPoint, n_samples: int, rng: RngStream) -> np.ndarray:
    """Empirical argmax frequencies of Z_i / sqrt(x_i)"""
    if n_samples < 10_000:
        raise DomainError(f"winner-map Monte Carlo needs at least 10^4 samples, got {n_samples}")
    scales = 1.0 / np.sqrt(x.array())
    counts = np.zeros(x.r, dtype=np.int64)
    remaining = n_samples
    while remaining > 0:
        size = min(remaining, MC_CHUNK)
        z = rng.standard_normal(size * x.r).reshape(size, x.r)
        counts += _argmax_counts(z * scales, x.r)
        remaining -= size
    return counts / n_samples


def binomial_standard_errors(freqs: np.ndarray, n_samples: int) -> np.ndarray:
    freqs = np.asarray(freqs, dtype=np.float64)
    return np.sqrt(freqs * (1.0 - freqs) / n_samples)


def check_dotprod(x: SimplexPoint, g: Sequence[float]) -> Tuple[float, bool]:
    """sum_i x_i g_i and whether it stays below 1/r (+1e-7)"""
    g = np.asarray(g, dtype=np.float64)
    if g.size != x.r:
        raise DomainError(f"winner map has {g.size} entries for r={x.r}")
    value = float(np.dot(x.array(), g))
    return value, value <= 1.0 / x.r + 1e-7


def perturb_gap_mc(x: SimplexPoint, eta: float, n_samples: int, rng: RngStream) -> float:
    """
    Worst winner-frequency shift under scale-proportional perturbations.

    Y_i = s_i Z_i and W_i = Y_i + eps_i eta s_i share the same Z; the sweep
    covers every sign pattern eps in {-1, +1}^r and returns
    max over patterns of max_i |p_i - g_i|.
    """
    if eta < 0.0:
        raise DomainError(f"perturbation size must be nonnegative, got {eta}")
    if x.r > MAX_PERTURB_ARMS:
        raise DomainError(f"sign sweep limited to r <= {MAX_PERTURB_ARMS}, got {x.r}")
    if n_samples < 1:
        raise DomainError("perturbation Monte Carlo needs samples")

    scales = 1.0 / np.sqrt(x.array())
    patterns = np.array(list(itertools.product((-1.0, 1.0), repeat=x.r)))
    shifts = patterns * eta * scales
    base = np.zeros(x.r, dtype=np.int64)
    shifted = np.zeros((len(patterns), x.r), dtype=np.int64)

    remaining = n_samples
    while remaining > 0:
        size = min(remaining, MC_CHUNK // 4)
        y = rng.standard_normal(size * x.r).reshape(size, x.r) * scales
        base += _argmax_counts(y, x.r)
        for k, shift in enumerate(shifts):
            shifted[k] += _argmax_counts(y + shift, x.r)
        remaining -= size

    g_hat = base / n_samples
    p_hat = shifted / n_samples
    return float(np.max(np.abs(p_hat - g_hat[None, :])))


def geom_loglaw_sim(alpha: float, sigma_A: float, n: int, k0: int, rng: RngStream) -> float:
    """
    (sigma / n) log sum_{k=k0}^{n} G_k with independent geometric G_k.

    Success probabilities p_k = min(1, sqrt(sigma/k) exp(-alpha k / sigma));
    the statistic concentrates at alpha.
    """
    if not alpha > 0.0 or not sigma_A > 0.0:
        raise DomainError("geometric log-law needs alpha > 0 and sigma > 0")
    if not 1 <= k0 < n:
        raise DomainError(f"geometric log-law needs 1 <= k0 < n, got k0={k0}, n={n}")
    k = np.arange(k0, n + 1, dtype=np.float64)
    p = np.minimum(1.0, np.sqrt(sigma_A / k) * np.exp(-alpha * k / sigma_A))
    if np.any(p <= 0.0):
        raise DomainError("success probabilities underflow float64; reduce alpha * n / sigma")
    total = float(np.sum(geometric_array(p, rng)))
    return sigma_A / n * math.log(total)


def time_uniform_ratio(horizon: int, delta: float, rng: RngStream) -> float:
    """
    max_{3<=t<=T} |S_t / t| / sqrt((log log t + log(1/delta)) / t) for one
    standard normal random walk; an empirical look at the constant in the
    time-uniform sub-Gaussian bound.
    """
    if horizon < 3 or not 0.0 < delta < 1.0:
        raise DomainError("time-uniform diagnostic needs T >= 3 and delta in (0, 1)")
    walk = np.cumsum(rng.standard_normal(horizon))
    t = np.arange(1, horizon + 1, dtype=np.float64)[2:]
    radius = np.sqrt((np.log(np.log(t)) + math.log(1.0 / delta)) / t)
    return float(np.max(np.abs(walk[2:] / t) / radius))
