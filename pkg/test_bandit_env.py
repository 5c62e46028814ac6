#!/usr/bin/env python3
"""
Test the Gaussian bandit environment
"""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from bandit_env import make_instance, pull
from errors import DomainError
from stats_core import RngStream


def test_instance_construction():
    """Test optimal set, gaps and validation"""
    print("=" * 60)
    print("TEST 1: Instance Construction")
    print("=" * 60)

    inst = make_instance([1.0, 1.0, 0.0])
    assert inst.mu_star == 1.0
    assert inst.optimal_set == (0, 1)
    assert inst.m == 2
    assert inst.gaps == {2: 1.0}
    assert list(inst.gap_vector()) == [0.0, 0.0, 1.0]
    assert inst.is_optimal(1) and not inst.is_optimal(2)
    print(f"✓ (1, 1, 0): S* = {inst.optimal_set}, gaps = {inst.gaps}")

    near = make_instance([1.0, 1.0 - 1e-12, 0.0])
    assert near.m == 1
    assert near.optimal_set == (0,)
    print("✓ Near-ties are distinct arms")

    for bad in ([1.0], [], [1.0, float("inf")], [1.0, float("nan")], ["a", 1.0]):
        try:
            make_instance(bad)
            assert False, f"{bad!r} should fail"
        except DomainError:
            pass
    print("✓ Fewer than 2 arms and non-finite means rejected")

    data = inst.to_dict()
    assert data["optimal_set"] == [0, 1]
    assert data["gaps"] == {"2": 1.0}
    print()


def test_regret_of_counts():
    """Test the regret identity sum gap * N"""
    print("=" * 60)
    print("TEST 2: Regret of Counts")
    print("=" * 60)

    inst = make_instance([1.0, 0.5, 0.0])
    assert inst.regret_of_counts([100, 10, 4]) == 0.5 * 10 + 1.0 * 4
    assert make_instance([2.0, 2.0]).regret_of_counts([3, 7]) == 0.0
    print("✓ Regret equals sum of gap times pull count")
    print()


def test_pull():
    """Test reward draws"""
    print("=" * 60)
    print("TEST 3: Pull")
    print("=" * 60)

    inst = make_instance([0.5, -1.0])
    reward = pull(inst, 1, RngStream(3, 0, 0))
    assert reward == -1.0 + RngStream(3, 0, 0).standard_normal()
    print("✓ One pull consumes exactly one draw")

    rng = RngStream(3, 1, 0)
    rewards = [pull(inst, 0, rng) for _ in range(10000)]
    mean = sum(rewards) / len(rewards)
    assert abs(mean - 0.5) < 0.05, mean
    print(f"✓ Empirical mean {mean:.4f} for mu = 0.5")

    for arm in (-1, 2):
        try:
            pull(inst, arm, rng)
            assert False, f"arm {arm} should fail"
        except DomainError:
            pass
    print("✓ Out-of-range arms rejected")
    print()


def run_all_tests():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("BANDIT ENVIRONMENT TEST SUITE")
    print("=" * 60)
    print()

    try:
        test_instance_construction()
        test_regret_of_counts()
        test_pull()

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
