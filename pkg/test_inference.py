#!/usr/bin/env python3
"""
Test per-arm estimates, studentized statistics, Wald intervals and KS checks
"""

import math
import sys
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from errors import DomainError
from inference import (
    ArmEstimate,
    WaldInterval,
    arm_estimate,
    coverage_tally,
    ks_against_normal,
    studentized,
    wald_ci,
)
from stats_core import RngStream


def test_arm_estimate():
    """Test estimates from sufficient statistics"""
    print("=" * 60)
    print("TEST 1: Arm Estimates")
    print("=" * 60)

    est = arm_estimate(3, 6.0, 14.0)
    assert est == ArmEstimate(n=3, mean=2.0, sample_std=1.0)
    print("✓ Rewards (1, 2, 3): mean 2, std 1")

    assert arm_estimate(1, 0.7, 0.49).sample_std == 1.0
    constant = arm_estimate(3, 0.3, 0.03)
    assert constant.sample_std >= 0.0 and constant.sample_std < 1e-7
    print("✓ Single pull reports std 1; cancellation clamps at 0")

    # fsum is exactly rounded, so any order of the same rewards gives the same statistics
    rewards = RngStream(8, 0, 0).standard_normal(500) + 0.3
    reference = arm_estimate(500, math.fsum(rewards), math.fsum(rewards * rewards))
    shuffler = np.random.default_rng(8)
    for _ in range(20):
        shuffled = shuffler.permutation(rewards)
        assert arm_estimate(500, math.fsum(shuffled), math.fsum(shuffled * shuffled)) == reference
    print("✓ Estimate invariant under reordering of the rewards")

    try:
        arm_estimate(0, 0.0, 0.0)
        assert False, "n = 0 should fail"
    except DomainError:
        pass
    assert est.to_dict() == {"n": 3, "mean": 2.0, "std": 1.0}
    print()


def test_studentized_and_wald():
    """Test studentized statistics and intervals"""
    print("=" * 60)
    print("TEST 2: Studentized Statistics and Wald Intervals")
    print("=" * 60)

    est = ArmEstimate(n=100, mean=0.1, sample_std=2.0)
    assert abs(studentized(est, 0.0) - 0.5) < 1e-15
    assert studentized(ArmEstimate(4, 1.0, 0.0), 1.0) == 0.0
    assert studentized(ArmEstimate(4, 1.5, 0.0), 1.0) == math.inf
    assert studentized(ArmEstimate(4, 0.5, 0.0), 1.0) == -math.inf
    print("✓ Zero std gives 0 or a signed infinity")

    ci = wald_ci(ArmEstimate(n=100, mean=0.0, sample_std=1.0), 0.05)
    assert abs(ci.upper - 0.1959963984540054) < 1e-12
    assert abs(ci.lower + 0.1959963984540054) < 1e-12
    assert abs(ci.level - 0.95) < 1e-15
    assert abs(ci.width - 2 * 0.1959963984540054) < 1e-12
    print(f"✓ 95% interval [{ci.lower:.6f}, {ci.upper:.6f}]")

    edge = WaldInterval(0.0, 1.0, 0.95)
    assert edge.contains(0.0) and edge.contains(1.0) and not edge.contains(1.0 + 1e-12)
    for alpha in (0.0, 1.0, -0.1):
        try:
            wald_ci(ArmEstimate(5, 0.0, 1.0), alpha)
            assert False, f"alpha {alpha} should fail"
        except DomainError:
            pass
    print("✓ Endpoints count as covered; alpha must lie in (0, 1)")
    print()


def test_coverage_monte_carlo():
    """Test that iid Wald intervals cover at close to the nominal rate"""
    print("=" * 60)
    print("TEST 3: Coverage Tally")
    print("=" * 60)

    rng = RngStream(77, 0, 0)
    intervals, truths = [], []
    for _ in range(2000):
        rewards = 0.3 + rng.standard_normal(50)
        est = arm_estimate(50, float(rewards.sum()), float(np.dot(rewards, rewards)))
        intervals.append(wald_ci(est, 0.05))
        truths.append(0.3)
    rate = coverage_tally(intervals, truths)
    assert 0.925 <= rate <= 0.965, rate
    print(f"✓ Coverage {rate:.4f} over 2000 iid samples of size 50")

    assert coverage_tally([WaldInterval(0, 1, 0.9), WaldInterval(2, 3, 0.9)], [0.5, 0.5]) == 0.5
    for args in (([], []), ([WaldInterval(0, 1, 0.9)], [0.5, 0.6])):
        try:
            coverage_tally(*args)
            assert False, "bad tally input should fail"
        except DomainError:
            pass
    print("✓ Empty or mismatched inputs rejected")
    print()


def test_ks_against_normal():
    """Test the KS comparison against N(0, 1)"""
    print("=" * 60)
    print("TEST 4: KS Against Normal")
    print("=" * 60)

    z = RngStream(78, 0, 0).standard_normal(2000)
    stat, p = ks_against_normal(z)
    assert p > 0.001, p
    _, p_shift = ks_against_normal(z + 1.0)
    assert p_shift < 1e-6, p_shift
    print(f"✓ N(0,1) sample: D = {stat:.4f}, p = {p:.4f}; shifted sample rejected")

    _, p_inf = ks_against_normal([math.inf] * 10)
    assert p_inf < 0.01
    try:
        ks_against_normal([])
        assert False, "empty sample should fail"
    except DomainError:
        pass
    print()


def run_all_tests():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("INFERENCE TEST SUITE")
    print("=" * 60)
    print()

    try:
        test_arm_estimate()
        test_studentized_and_wald()
        test_coverage_monte_carlo()
        test_ks_against_normal()

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
