"""
Numerical lemma checks.

Every check reports a signed ``worst_violation``: the largest amount by which
a measured quantity exceeds what the inequality allows over the whole grid.
A check passes when that number is <= 0, so a negative value is the slack
left at the tightest grid point. Diagnostic checks record a number and
always pass.
"""

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from errors import ConfigError
from lab_logger import get_logger
from stability_lab import (
    SimplexPoint,
    binomial_standard_errors,
    check_dotprod,
    geom_loglaw_sim,
    perturb_gap_mc,
    time_uniform_ratio,
    winner_map_mc,
    winner_map_quadrature,
)
from stats_core import (
    RngStream,
    crude_tail_bound,
    mills_bracket,
    sqrt_inequality_gaps,
    std_normal_cdf,
    std_normal_quantile,
)

_log = get_logger()

# Lemma sweeps draw from stream ids above any replication id.
LEMMA_STREAM_BASE = 1 << 40


@dataclass
class LemmaSettings:
    """Grid sizes and Monte Carlo budgets of the lemma sweep"""
    monotone_points: int = 500
    dotprod_points: int = 1000
    exchange_points: int = 100
    mc_points: int = 100
    mc_draws: int = 1_000_000
    mc_reference_draws: int = 10_000_000
    mc_failure_fraction: float = 0.05
    perturb_draws: int = 200_000
    geom_runs: int = 50
    geom_alpha: float = 0.5
    geom_sigma: float = 20.0
    geom_n: int = 4000
    geom_tolerance: float = 0.05
    tail_grid: int = 10_000
    sqrt_grid: int = 512
    cdf_grid: int = 2001
    tub_horizon: int = 100_000
    tub_delta: float = 0.05

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "LemmaSettings":
        if data is None:
            return cls()
        if not isinstance(data, dict):
            raise ConfigError(f"lemmas block must be an object, got {data!r}")
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown keys in lemmas block: {sorted(unknown)}")
        defaults = cls()
        values = {}
        for key, value in data.items():
            expected = type(getattr(defaults, key))
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"lemmas.{key} must be a finite number, got {value!r}")
            if expected is int and value != int(value):
                raise ConfigError(f"lemmas.{key} must be an integer, got {value!r}")
            values[key] = expected(value)
        settings = cls(**values)
        for f in fields(cls):
            if f.type is int and getattr(settings, f.name) < 1:
                raise ConfigError(f"lemmas.{f.name} must be at least 1, got {getattr(settings, f.name)}")
        if settings.mc_draws < 10_000 or settings.mc_reference_draws < 10_000:
            raise ConfigError("lemmas Monte Carlo draws must be at least 10^4")
        if settings.geom_n < 4:
            raise ConfigError("lemmas.geom_n must be at least 4")
        if settings.tub_horizon < 3:
            raise ConfigError("lemmas.tub_horizon must be at least 3")
        if not 0.0 <= settings.mc_failure_fraction < 1.0:
            raise ConfigError(f"lemmas.mc_failure_fraction must lie in [0, 1), got {settings.mc_failure_fraction}")
        if not 0.0 < settings.tub_delta < 1.0:
            raise ConfigError(f"lemmas.tub_delta must lie in (0, 1), got {settings.tub_delta}")
        for key in ("geom_alpha", "geom_sigma", "geom_tolerance"):
            if not getattr(settings, key) > 0.0:
                raise ConfigError(f"lemmas.{key} must be positive, got {getattr(settings, key)}")
        return settings


@dataclass
class LemmaCheck:
    name: str
    grid_size: int
    tolerance: float
    worst_violation: float
    passed: bool
    diagnostic: bool = False
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "grid_size": self.grid_size,
            "tolerance": self.tolerance,
            "worst_violation": self.worst_violation,
            "pass": self.passed,
            "diagnostic": self.diagnostic,
            "note": self.note,
        }


@dataclass
class LemmaReport:
    seed: int
    settings: LemmaSettings
    checks: List[LemmaCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[LemmaCheck]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "settings": self.settings.to_dict(),
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
        }


def _verdict(name: str, grid_size: int, tolerance: float, worst: float, note: str = "") -> LemmaCheck:
    return LemmaCheck(
        name=name,
        grid_size=grid_size,
        tolerance=tolerance,
        worst_violation=float(worst),
        passed=bool(worst <= 0.0),
        note=note,
    )


def _random_points(rng: RngStream, r: int, count: int) -> List[SimplexPoint]:
    draws = rng.generator.dirichlet(np.full(r, 2.0), size=count)
    return [SimplexPoint.normalized(row) for row in draws]


# ==================== GAUSSIAN FUNCTIONS ====================

def _upper_tail_cf(x: float) -> float:
    """1 - Phi(x) for x > 0 from the Laplace continued fraction, evaluated by modified Lentz"""
    tiny = 1e-300
    f = x
    c, d = f, 0.0
    for j in range(1, 10_000):
        d = x + j * d
        d = 1.0 / (d if d != 0.0 else tiny)
        c = x + j / c
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 4e-16:
            break
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi) / f


def reference_normal_cdf(x: float) -> float:
    """
    Phi(x) without erf: Taylor series about 0 for |x| <= 3, continued
    fraction for the tail beyond.
    """
    if x > 3.0:
        return 1.0 - _upper_tail_cf(x)
    if x < -3.0:
        return _upper_tail_cf(-x)
    term = total = x
    k = 0
    while abs(term) > 1e-18 * abs(total) or k < 2:
        k += 1
        term *= x * x / (2 * k + 1)
        total += term
    return 0.5 + math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi) * total


def check_cdf_oracle(settings: LemmaSettings) -> LemmaCheck:
    tol = 1e-12
    grid = np.linspace(-8.0, 8.0, settings.cdf_grid)
    worst = max(abs(std_normal_cdf(x) - reference_normal_cdf(float(x))) for x in grid)
    return _verdict("normal_cdf_oracle", grid.size, tol, worst - tol)


def check_cdf_symmetry_and_order(settings: LemmaSettings) -> LemmaCheck:
    """Phi(-x) = 1 - Phi(x) on [-8, 8]; strictly increasing where doubles can resolve it"""
    tol = 1e-14
    grid = np.linspace(-8.0, 8.0, settings.tail_grid)
    values = np.array([std_normal_cdf(x) for x in grid])
    symmetry = max(abs(std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))) for x in grid) - tol
    # near +8 consecutive grid values differ by less than one ulp of 1.0
    strict_step = float(np.diff(values[grid <= 7.0]).min())
    strict = 1.0 if strict_step <= 0.0 else -strict_step
    weak = -float(np.diff(values).min())
    worst = max(symmetry, strict, weak)
    return _verdict(
        "normal_cdf_symmetry_monotone", grid.size, tol, worst,
        note="strict increase asserted on [-8, 7], nondecreasing on [-8, 8]",
    )


def check_quantile_roundtrip(settings: LemmaSettings) -> LemmaCheck:
    """quantile(cdf(x)) = x on [-6, 6], read through the lower tail for x > 0"""
    tol = 1e-10
    grid = np.linspace(-6.0, 6.0, settings.cdf_grid)
    worst = 0.0
    for x in grid:
        if x <= 0.0:
            back = std_normal_quantile(std_normal_cdf(x))
        else:
            back = -std_normal_quantile(std_normal_cdf(-x))
        worst = max(worst, abs(back - x))
    return _verdict(
        "normal_quantile_roundtrip", grid.size, tol, worst - tol,
        note="positive x use Phi(-x): doubles near 1 cannot resolve 1e-10 in x beyond ~5",
    )


def check_mills_bracket(settings: LemmaSettings) -> LemmaCheck:
    grid = np.linspace(1e-3, 10.0, settings.tail_grid)
    worst = -np.inf
    for x in grid:
        lower, upper = mills_bracket(x)
        tail = std_normal_cdf(-x)
        # relative violations so that deep-tail values are compared fairly
        worst = max(worst, (lower - tail) / tail, (tail - upper) / tail)
        if x >= 1.0:
            worst = max(worst, (0.5 * upper - tail) / tail)
    return _verdict("mills_bracket", grid.size, 0.0, worst)


def check_crude_tail(settings: LemmaSettings) -> LemmaCheck:
    grid = np.linspace(0.0, 10.0, settings.tail_grid)
    worst = max((std_normal_cdf(-x) - crude_tail_bound(x)) / crude_tail_bound(x) for x in grid)
    return _verdict("crude_tail_bound", grid.size, 0.0, worst)


def check_sqrt_inequalities(settings: LemmaSettings) -> LemmaCheck:
    grid = np.linspace(0.0, 1.0, settings.sqrt_grid)
    worst = -np.inf
    for x in grid:
        upper, lower = sqrt_inequality_gaps(float(x))
        worst = max(worst, -upper)
        if lower is not None:
            worst = max(worst, -lower)
    return _verdict("sqrt_inequalities", grid.size, 0.0, worst)


# ==================== WINNER MAP ====================

def check_winner_map_normalization(settings: LemmaSettings, rng: RngStream) -> LemmaCheck:
    tol = 1e-8
    worst = -np.inf
    count = 0
    for r in range(2, 7):
        points = _random_points(rng, r, settings.exchange_points)
        points.append(SimplexPoint.normalized(np.ones(r)))
        for x in points:
            g = winner_map_quadrature(x)
            worst = max(worst, abs(float(np.sum(g)) - 1.0) - tol)
            count += 1
    return _verdict("winner_map_normalization", count, tol, worst)


def check_winner_map_uniform(settings: LemmaSettings) -> LemmaCheck:
    tol = 1e-8
    worst = -np.inf
    for r in range(2, 7):
        g = winner_map_quadrature(SimplexPoint.normalized(np.ones(r)))
        worst = max(worst, float(np.max(np.abs(g - 1.0 / r))) - tol)
    g = winner_map_quadrature(SimplexPoint((0.9, 0.1)))
    worst = max(worst, float(np.max(np.abs(g - 0.5))) - tol)
    return _verdict("winner_map_uniform_and_two_arm", 6, tol, worst)


def check_monotonicity(settings: LemmaSettings, rng: RngStream) -> LemmaCheck:
    """x_i > x_j + 1e-3 implies g_i < g_j"""
    gap = 1e-3
    worst = -np.inf
    count = 0
    for r in (3, 4, 5):
        for x in _random_points(rng, r, settings.monotone_points):
            g = winner_map_quadrature(x)
            xs = x.array()
            for i in range(r):
                for j in range(r):
                    if xs[i] - xs[j] > gap:
                        worst = max(worst, g[i] - g[j])
            count += 1
    return _verdict("winner_map_monotonicity", count, gap, worst, note="pairs with x_i - x_j > 1e-3")


def check_dotprod_bound(settings: LemmaSettings, rng: RngStream) -> List[LemmaCheck]:
    bound_worst = -np.inf
    two_arm_worst = -np.inf
    strict_worst = -np.inf
    count = 0
    for r in range(2, 7):
        for x in _random_points(rng, r, settings.dotprod_points):
            g = winner_map_quadrature(x)
            value, _ = check_dotprod(x, g)
            bound_worst = max(bound_worst, value - (1.0 / r + 1e-7))
            if r == 2:
                two_arm_worst = max(two_arm_worst, abs(value - 0.5) - 1e-8)
            elif max(x.x) - min(x.x) >= 0.2:
                strict_worst = max(strict_worst, value - (1.0 / r - 1e-4))
            count += 1
    skewed = SimplexPoint((0.7, 0.1, 0.1, 0.1))
    value, _ = check_dotprod(skewed, winner_map_quadrature(skewed))
    strict_worst = max(strict_worst, value - (0.25 - 1e-4))
    return [
        _verdict("dotprod_bound", count, 1e-7, bound_worst),
        _verdict("dotprod_two_arm_equality", settings.dotprod_points, 1e-8, two_arm_worst),
        _verdict(
            "dotprod_strict_when_spread", count, 1e-4, strict_worst,
            note="r >= 3 and max x - min x >= 0.2",
        ),
    ]


def check_exchangeability(settings: LemmaSettings, rng: RngStream) -> LemmaCheck:
    tol = 1e-9
    worst = -np.inf
    count = 0
    perm_rng = rng.generator
    for r in range(2, 7):
        for x in _random_points(rng, r, settings.exchange_points):
            perm = perm_rng.permutation(r)
            g = winner_map_quadrature(x)
            g_perm = winner_map_quadrature(SimplexPoint(tuple(x.array()[perm])))
            worst = max(worst, float(np.max(np.abs(g_perm - g[perm]))) - tol)
            count += 1
    return _verdict("winner_map_exchangeability", count, tol, worst)


def check_quadrature_vs_mc(settings: LemmaSettings, rng: RngStream, mc_rng: RngStream) -> List[LemmaCheck]:
    """
    Quadrature against Monte Carlo within 3 standard errors.

    With several hundred coordinates compared, a handful of 3-sigma
    excursions is expected by chance, so the sweep tolerates a small fraction
    of disagreeing points.
    """
    failing = 0
    worst_z = 0.0
    for k in range(settings.mc_points):
        r = 2 + k % 5
        x = _random_points(rng, r, 1)[0]
        g = winner_map_quadrature(x)
        freqs = winner_map_mc(x, settings.mc_draws, mc_rng)
        se = binomial_standard_errors(g, settings.mc_draws)
        z = float(np.max(np.abs(freqs - g) / se))
        worst_z = max(worst_z, z)
        if z > 3.0:
            failing += 1
    fraction = failing / settings.mc_points

    reference = SimplexPoint((0.5, 0.3, 0.2))
    g_ref = winner_map_quadrature(reference)
    f_ref = winner_map_mc(reference, settings.mc_reference_draws, mc_rng)
    z_ref = float(np.max(np.abs(f_ref - g_ref) / binomial_standard_errors(g_ref, settings.mc_reference_draws)))
    ordered = g_ref[0] < g_ref[1] < g_ref[2]
    return [
        _verdict(
            "winner_map_quadrature_vs_mc", settings.mc_points, settings.mc_failure_fraction,
            fraction - settings.mc_failure_fraction,
            note=f"{failing} points beyond 3 SE, largest z = {worst_z:.3f}",
        ),
        _verdict(
            "winner_map_reference_point", 1, 3.0, (z_ref - 3.0) if ordered else max(z_ref - 3.0, 1.0),
            note=f"x=(0.5,0.3,0.2) g={[round(v, 6) for v in g_ref]} z={z_ref:.3f}",
        ),
    ]


def check_perturbation(settings: LemmaSettings, mc_rng: RngStream) -> List[LemmaCheck]:
    """Winner perturbation is of order r * eta; the fitted constant is recorded, not asserted as universal"""
    etas = [round(0.01 * k, 2) for k in range(11)]
    noise = 3.0 * 0.5 / math.sqrt(settings.perturb_draws)
    order_worst = -np.inf
    monotone_worst = -np.inf
    constant = 0.0
    for r in range(2, 6):
        x = SimplexPoint.normalized(np.arange(1, r + 1, dtype=np.float64))
        gaps = [perturb_gap_mc(x, eta, settings.perturb_draws, mc_rng) for eta in etas]
        for eta, gap in zip(etas, gaps):
            order_worst = max(order_worst, gap - 2.0 * r * eta)
            if eta > 0.0:
                constant = max(constant, gap / (r * eta))
        for prev, nxt in zip(gaps, gaps[1:]):
            monotone_worst = max(monotone_worst, prev - nxt - 2.0 * noise)
    return [
        _verdict(
            "winner_perturbation_order", 4 * len(etas), 2.0, order_worst,
            note=f"empirical constant max gap/(r eta) = {constant:.4f}",
        ),
        _verdict("winner_perturbation_monotone_in_eta", 4 * len(etas), 2.0 * noise, monotone_worst),
    ]


# ==================== GEOMETRIC SUMS ====================

def _median_loglaw(settings: LemmaSettings, rng: RngStream, n: int, k0: int) -> float:
    runs = [
        geom_loglaw_sim(settings.geom_alpha, settings.geom_sigma, n, k0, rng)
        for _ in range(settings.geom_runs)
    ]
    return float(np.median(runs))


def check_geometric_loglaw(settings: LemmaSettings, rng: RngStream) -> List[LemmaCheck]:
    tol = settings.geom_tolerance
    alpha = settings.geom_alpha
    n = settings.geom_n
    base = _median_loglaw(settings, rng, n, 1)
    doubled = _median_loglaw(settings, rng, 2 * n, 1)
    late_start = _median_loglaw(settings, rng, n, math.ceil(math.sqrt(n)))
    return [
        _verdict("geometric_loglaw", settings.geom_runs, tol, abs(base - alpha) - tol,
                 note=f"median {base:.4f}"),
        _verdict("geometric_loglaw_doubled_n", settings.geom_runs, tol, abs(doubled - base) - tol,
                 note=f"median {doubled:.4f}"),
        _verdict("geometric_loglaw_sqrt_start", settings.geom_runs, tol, abs(late_start - alpha) - tol,
                 note=f"median {late_start:.4f}"),
    ]


def check_time_uniform(settings: LemmaSettings, rng: RngStream) -> LemmaCheck:
    ratio = time_uniform_ratio(settings.tub_horizon, settings.tub_delta, rng)
    return LemmaCheck(
        name="time_uniform_constant",
        grid_size=settings.tub_horizon,
        tolerance=0.0,
        worst_violation=ratio,
        passed=True,
        diagnostic=True,
        note="empirical max ratio; the bound's constant is not numeric",
    )


# ==================== SWEEP ====================

def run_lemma_suite(settings: Optional[LemmaSettings] = None, seed: int = 0) -> LemmaReport:
    """Run every lemma check with lanes derived from ``seed``"""
    settings = settings or LemmaSettings()
    report = LemmaReport(seed=seed, settings=settings)

    def lane(k: int) -> RngStream:
        return RngStream(seed, LEMMA_STREAM_BASE + k, 0)

    steps: List[Callable[[], Any]] = [
        lambda: check_cdf_oracle(settings),
        lambda: check_cdf_symmetry_and_order(settings),
        lambda: check_quantile_roundtrip(settings),
        lambda: check_mills_bracket(settings),
        lambda: check_crude_tail(settings),
        lambda: check_sqrt_inequalities(settings),
        lambda: check_winner_map_normalization(settings, lane(1)),
        lambda: check_winner_map_uniform(settings),
        lambda: check_monotonicity(settings, lane(2)),
        lambda: check_dotprod_bound(settings, lane(3)),
        lambda: check_exchangeability(settings, lane(4)),
        lambda: check_quadrature_vs_mc(settings, lane(5), lane(6)),
        lambda: check_perturbation(settings, lane(7)),
        lambda: check_geometric_loglaw(settings, lane(8)),
        lambda: check_time_uniform(settings, lane(9)),
    ]
    for step in steps:
        outcome = step()
        for check in outcome if isinstance(outcome, list) else [outcome]:
            report.checks.append(check)
            _log.lemma_verdict(check)
    return report
