#!/usr/bin/env python3
"""
Test stability targets, trajectory diagnostics and winner-map numerics
"""

import math
import sys
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from bandit_env import make_instance
from errors import DomainError
from experiment_config import ExperimentConfig
from experiment_engine import run_experiment
from policies import PolicyMode
from stability_lab import (
    SimplexPoint,
    binomial_standard_errors,
    check_dotprod,
    geom_loglaw_sim,
    lyapunov_v,
    optimal_share_spread,
    perturb_gap_mc,
    stability_ratios,
    stability_target,
    time_uniform_ratio,
    winner_map_mc,
    winner_map_quadrature,
)
from stats_core import RngStream


def expect(exc_type, fn, *args):
    try:
        fn(*args)
    except exc_type:
        return
    raise AssertionError(f"{fn.__name__}{args} did not raise {exc_type.__name__}")


def test_stability_targets():
    """Test deterministic pull-count targets"""
    print("=" * 60)
    print("TEST 1: Stability Targets")
    print("=" * 60)

    inst = make_instance([1.0, 1.0, 0.0])
    target = stability_target(inst, PolicyMode.VARIANCE_INFLATED, 100000, 4.0)
    assert target.targets[0] == target.targets[1] == 50000.0
    assert target.targets[2] == 2.0 * 4.0 * math.log(100000) / 1.0
    print(f"✓ Targets at T = 1e5: {[round(t, 2) for t in target.targets]}")

    ratios = stability_ratios([50000, 49000, target.targets[2]], target)
    assert ratios[0] == 1.0 and ratios[1] == 0.98 and ratios[2] == 1.0

    half = stability_target(make_instance([0.0, 0.5]), PolicyMode.MEAN_BONUS, 1000, 1.0)
    assert half.targets[1] == 1000.0
    assert half.targets[0] == 2.0 * math.log(1000) / 0.25

    expect(DomainError, stability_target, inst, PolicyMode.VANILLA, 1000, 1.0)
    expect(DomainError, stability_target, inst, PolicyMode.MEAN_BONUS, 2, 1.0)
    expect(DomainError, stability_target, inst, PolicyMode.MEAN_BONUS, 1000, 0.0)
    expect(DomainError, stability_ratios, [1, 2], target)
    print("✓ Vanilla, T < 3, c_A <= 0 and length mismatches rejected")
    print()


def test_trajectory_diagnostics():
    """Test Lyapunov function and optimal-share spread"""
    print("=" * 60)
    print("TEST 2: Lyapunov Function and Share Spread")
    print("=" * 60)

    assert lyapunov_v([5, 5]) == 0.0
    assert lyapunov_v([10, 0]) == 0.5
    assert abs(lyapunov_v([2, 1, 1]) - (1 / 36 + 2 / 144)) < 1e-15
    expect(DomainError, lyapunov_v, [7])
    expect(DomainError, lyapunov_v, [0, 0])
    print("✓ V is 0 at uniform shares and 1/2 at (1, 0)")

    assert abs(optimal_share_spread([6, 4, 100], [0, 1]) - 0.2) < 1e-15
    assert optimal_share_spread([6, 4, 100], [2]) == 0.0
    print("✓ Share spread among optimal arms")
    print()


def test_simplex_points():
    """Test simplex point validation"""
    print("=" * 60)
    print("TEST 3: Simplex Points")
    print("=" * 60)

    x = SimplexPoint.normalized([1, 2, 7])
    assert x.r == 3 and abs(sum(x.x) - 1.0) < 1e-15
    for bad in ((1.0, 0.0), (0.6, 0.6), (1.0,), (0.5, float("nan"))):
        expect(DomainError, SimplexPoint, bad)
    expect(DomainError, SimplexPoint.normalized, [1.0, -1.0])
    print("✓ Boundary points, wrong sums and r < 2 rejected")
    print()


def test_winner_map():
    """Test winner probabilities by quadrature and Monte Carlo"""
    print("=" * 60)
    print("TEST 4: Winner Map")
    print("=" * 60)

    for r in range(2, 7):
        g = winner_map_quadrature(SimplexPoint.normalized(np.ones(r)))
        assert np.max(np.abs(g - 1.0 / r)) < 1e-8
    print("✓ Uniform point maps to 1/r for r = 2..6")

    g2 = winner_map_quadrature(SimplexPoint((0.9, 0.1)))
    assert np.max(np.abs(g2 - 0.5)) < 1e-8
    print("✓ Two arms: (1/2, 1/2) for any x")

    ref = SimplexPoint((0.5, 0.3, 0.2))
    g = winner_map_quadrature(ref)
    assert abs(g.sum() - 1.0) < 1e-8
    assert g[0] < g[1] < g[2]
    print(f"✓ g(0.5, 0.3, 0.2) = {[round(v, 6) for v in g]}")

    skewed = winner_map_quadrature(SimplexPoint((0.98, 0.01, 0.01)))
    assert abs(skewed.sum() - 1.0) < 1e-8
    assert abs(skewed[1] - skewed[2]) < 1e-8
    print("✓ Unbalanced point still normalized and exchangeable")

    freqs = winner_map_mc(ref, 200000, RngStream(5, 0, 0))
    se = binomial_standard_errors(g, 200000)
    assert np.max(np.abs(freqs - g) / se) < 4.5
    print(f"✓ Monte Carlo {[round(v, 4) for v in freqs]} within 4.5 SE")

    expect(DomainError, winner_map_quadrature, ref, 32)
    expect(DomainError, winner_map_mc, ref, 100, RngStream(5, 0, 1))
    print()


def test_dotprod_and_perturbation():
    """Test the dot-product bound and the perturbation sweep"""
    print("=" * 60)
    print("TEST 5: Dot Product Bound and Perturbation")
    print("=" * 60)

    x2 = SimplexPoint((0.8, 0.2))
    value, ok = check_dotprod(x2, winner_map_quadrature(x2))
    assert ok and abs(value - 0.5) < 1e-8

    x4 = SimplexPoint((0.7, 0.1, 0.1, 0.1))
    value, ok = check_dotprod(x4, winner_map_quadrature(x4))
    assert ok and value < 0.25 - 1e-4
    print(f"✓ sum x_i g_i = {value:.6f} < 1/4 at a spread point")
    expect(DomainError, check_dotprod, x4, [0.5, 0.5])

    x = SimplexPoint((0.2, 0.3, 0.5))
    assert perturb_gap_mc(x, 0.0, 20000, RngStream(6, 0, 0)) == 0.0
    gap = perturb_gap_mc(x, 0.05, 20000, RngStream(6, 0, 0))
    assert 0.0 < gap <= 2.0 * 3 * 0.05
    print(f"✓ Perturbation gap {gap:.4f} at eta = 0.05")

    expect(DomainError, perturb_gap_mc, x, -0.1, 1000, RngStream(6, 0, 1))
    expect(DomainError, perturb_gap_mc, SimplexPoint.normalized(np.ones(13)), 0.1, 1000, RngStream(6, 0, 1))
    print()


def test_geometric_loglaw():
    """Test concentration of the geometric log-sum statistic"""
    print("=" * 60)
    print("TEST 6: Geometric Log Law")
    print("=" * 60)

    rng = RngStream(8, 0, 0)
    runs = [geom_loglaw_sim(0.5, 20.0, 4000, 1, rng) for _ in range(15)]
    median = float(np.median(runs))
    assert 0.45 < median < 0.6, median
    late = float(np.median([geom_loglaw_sim(0.5, 20.0, 4000, 64, rng) for _ in range(15)]))
    assert abs(late - median) < 0.02, (late, median)
    print(f"✓ Median {median:.4f} (k0 = 1), {late:.4f} (k0 = 64); limit 0.5")

    expect(DomainError, geom_loglaw_sim, 0.0, 20.0, 4000, 1, rng)
    expect(DomainError, geom_loglaw_sim, 0.5, 20.0, 100, 100, rng)

    ratio = time_uniform_ratio(5000, 0.05, RngStream(9, 0, 0))
    assert math.isfinite(ratio) and ratio > 0.0
    expect(DomainError, time_uniform_ratio, 2, 0.05, RngStream(9, 0, 1))
    print(f"✓ Time-uniform ratio {ratio:.4f}")
    print()


def test_lyapunov_drift():
    """Test that variance inflation holds equal arms closer to uniform than vanilla TS"""
    print("=" * 60)
    print("TEST 7: Lyapunov Drift on Equal Means")
    print("=" * 60)

    base = {
        "means": [1.0, 1.0, 1.0],
        "T": 10000,
        "replications": 200,
        "seed": 31,
        "alpha": 0.05,
        "checkpoints": [1000, 10000],
    }
    inflated = run_experiment(ExperimentConfig.from_dict({**base, "mode": "variance_inflated"}))
    vanilla = run_experiment(ExperimentConfig.from_dict({**base, "mode": "vanilla"}))

    v_inflated = [c.lyapunov_median for c in inflated.checkpoints]
    v_vanilla = [c.lyapunov_median for c in vanilla.checkpoints]
    assert all(v is not None and 0.0 <= v < 2.0 / 3.0 for v in v_inflated + v_vanilla)
    for b, a in zip(v_inflated, v_vanilla):
        assert b < a, (v_inflated, v_vanilla)
    print(f"✓ Median V: inflated {v_inflated} vs vanilla {v_vanilla}")

    shipped = ExperimentConfig.from_file(Path(__file__).parent / "configs" / "lyapunov_b.json")
    assert shipped.instance().m == 3 and shipped.checkpoints[-2] * 10 == shipped.horizon
    print("✓ configs/lyapunov_b.json tracks V at T/100, T/10 and T")
    print()


def run_all_tests():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("STABILITY LAB TEST SUITE")
    print("=" * 60)
    print()

    try:
        test_stability_targets()
        test_trajectory_diagnostics()
        test_simplex_points()
        test_winner_map()
        test_dotprod_and_perturbation()
        test_geometric_loglaw()
        test_lyapunov_drift()

        print("=" * 60)
        print("ALL TESTS PASSED ✓")
        print("=" * 60)
        return 0

    except AssertionError as e:
        print(f"\n❌ TEST FAILED: {e}")
        import traceback
        traceback.print_exc()
        return 1
    except Exception as e:
        print(f"\n❌ ERROR: {e}")
        import traceback
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(run_all_tests())
