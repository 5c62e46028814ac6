#!/usr/bin/env python3
"""
Test regret envelopes and acceptance bands
"""

import math
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from acceptance import (
    BAND_KINDS,
    evaluate_bands,
    lem3_envelope,
    mean_bonus_envelope,
    regret_envelope,
    violated,
)
from bandit_env import make_instance
from errors import DomainError
from experiment_config import ExperimentConfig
from experiment_engine import AggregateReport, ArmSummary, CheckpointSummary, QuantileSummary, run_experiment

CONFIG = ExperimentConfig.from_dict({
    "means": [1.0, 1.0, 0.0],
    "mode": "variance_inflated",
    "T": 1000,
    "replications": 4,
    "seed": 1,
    "alpha": 0.05,
    "checkpoints": [10, 100, 1000],
})


def arm_summary(arm, ratio, coverage, pvalue):
    return ArmSummary(
        arm=arm,
        count_mean=0.0,
        ratio=QuantileSummary.of([ratio]) if ratio is not None else None,
        coverage=coverage,
        studentized_mean=0.0,
        studentized_std=1.0,
        ks_statistic=0.01,
        ks_pvalue=pvalue,
    )


def checkpoint(time, regret_median, regret_mean=0.0, arms=()):
    return CheckpointSummary(
        time=time,
        regret_mean=regret_mean,
        regret_se=0.0,
        regret_median=regret_median,
        lyapunov_median=0.0,
        share_spread_median=0.0,
        arms=list(arms),
    )


def synthetic_report(final_regret_mean, final_regret_median=100.0):
    arms = [arm_summary(0, 1.0, 0.95, 0.5), arm_summary(1, 1.3, 0.5, 0.5), arm_summary(2, 0.9, 0.95, math.nan)]
    return AggregateReport(
        metadata={"sigma_A": 4.0, "beta_A": 0.0},
        targets=[500.0, 500.0, 55.26],
        checkpoints=[
            checkpoint(10, 8.0),
            checkpoint(100, 50.0),
            checkpoint(1000, final_regret_median, final_regret_mean, arms),
        ],
    )


def test_envelopes():
    """Test the closed-form regret envelopes"""
    print("=" * 60)
    print("TEST 1: Regret Envelopes")
    print("=" * 60)

    two_arm = make_instance([1.0, 0.0])
    assert abs(lem3_envelope(two_arm, 4.0, 10000) - 4.0 * math.log(2500.0)) < 1e-12
    tiny_gap = make_instance([1.0, 0.99])
    assert lem3_envelope(tiny_gap, 4.0, 100) == 0.0
    print("✓ Variance-inflation envelope, log clamped at 0 for tiny gaps")

    three_arm = make_instance([1.0, 0.5, 0.0])
    expected = 2.0 * 1.0 * 2.0 * math.log(100) * 3.0
    assert abs(mean_bonus_envelope(three_arm, 1.0, 100) - expected) < 1e-10
    print(f"✓ Mean-bonus envelope {expected:.4f}")

    for fn in (lem3_envelope, mean_bonus_envelope):
        for args in ((two_arm, 0.0, 100), (two_arm, 1.0, 1)):
            try:
                fn(*args)
                assert False, f"{fn.__name__}{args} should fail"
            except DomainError:
                pass

    report = synthetic_report(30.0)
    assert regret_envelope(CONFIG, report) == lem3_envelope(CONFIG.instance(), 4.0, 1000)
    vanilla = ExperimentConfig.from_dict({**CONFIG.to_dict(), "mode": "vanilla"})
    assert regret_envelope(vanilla, report) is None
    print("✓ Envelope picked by mode; none for vanilla")
    print()


def test_synthetic_bands():
    """Test band verdicts against a hand-built report"""
    print("=" * 60)
    print("TEST 2: Bands on a Synthetic Report")
    print("=" * 60)

    report = synthetic_report(30.0)

    stability = {b.name: b for b in evaluate_bands(CONFIG, report, "stability")}
    assert stability["stability_ratio_arm0"].passed
    assert not stability["stability_ratio_arm1"].passed
    assert stability["stability_ratio_arm2"].passed
    assert stability["stability_ratio_arm2"].upper == 1.5
    print("✓ Optimal arms use the narrow band, suboptimal arms the wide one")

    coverage = {b.name: b for b in evaluate_bands(CONFIG, report, "coverage")}
    assert coverage["coverage_arm0"].passed and not coverage["coverage_arm1"].passed
    assert not coverage["ks_pvalue_arm2"].passed
    print("✓ Coverage band and NaN KS p-value fails")

    regret = {b.name: b for b in evaluate_bands(CONFIG, report, "regret")}
    assert regret["regret_envelope"].passed
    assert regret["regret_sublinear"].passed
    assert regret["regret_sublinear"].value == 0.1

    regret = {b.name: b for b in evaluate_bands(CONFIG, synthetic_report(100.0, 500.0), "regret")}
    assert not regret["regret_envelope"].passed
    assert not regret["regret_sublinear"].passed
    print("✓ Regret above slack times envelope and equal early/late rates both fail")

    failed = violated(evaluate_bands(CONFIG, report, "stability"))
    assert [b.name for b in failed] == ["stability_ratio_arm1"]
    assert "VIOLATED" in failed[0].describe()
    assert failed[0].to_dict()["pass"] is False
    print()


def test_mode_and_kind_handling():
    """Test vanilla, unknown kinds and a real small run"""
    print("=" * 60)
    print("TEST 3: Modes and Band Kinds")
    print("=" * 60)

    vanilla = ExperimentConfig.from_dict({**CONFIG.to_dict(), "mode": "vanilla"})
    for kind in BAND_KINDS:
        assert evaluate_bands(vanilla, synthetic_report(30.0), kind) == []
    print("✓ Vanilla gets no bands")

    try:
        evaluate_bands(CONFIG, synthetic_report(30.0), "latency")
        assert False, "unknown kind should fail"
    except DomainError:
        pass

    report = run_experiment(CONFIG, workers=1)
    names = [b.name for kind in BAND_KINDS for b in evaluate_bands(CONFIG, report, kind)]
    assert names == [
        "stability_ratio_arm0", "stability_ratio_arm1", "stability_ratio_arm2",
        "coverage_arm0", "ks_pvalue_arm0", "coverage_arm1", "ks_pvalue_arm1",
        "coverage_arm2", "ks_pvalue_arm2",
        "regret_envelope", "regret_sublinear",
    ], names
    print(f"✓ Real run yields {len(names)} bands")
    print()


def test_degenerate_regret():
    """Test regret bands when regret is zero on every path or early on"""
    print("=" * 60)
    print("TEST 4: Degenerate Regret")
    print("=" * 60)

    flat = ExperimentConfig.from_dict({**CONFIG.to_dict(), "means": [1.0, 1.0, 1.0]})
    zero = AggregateReport(
        metadata={"sigma_A": 4.0, "beta_A": 0.0},
        targets=[1000.0 / 3] * 3,
        checkpoints=[checkpoint(10, 0.0), checkpoint(100, 0.0), checkpoint(1000, 0.0)],
    )
    assert evaluate_bands(flat, zero, "regret") == []
    for mode in ("variance_inflated", "mean_bonus"):
        config = ExperimentConfig.from_dict({**flat.to_dict(), "mode": mode})
        assert evaluate_bands(config, run_experiment(config, workers=1), "regret") == []
    print("✓ No suboptimal arm: no regret bands, real runs included")

    early_zero = AggregateReport(
        metadata={"sigma_A": 4.0, "beta_A": 0.0},
        targets=[500.0, 500.0, 55.26],
        checkpoints=[checkpoint(10, 0.0), checkpoint(100, 0.0), checkpoint(1000, 4.0, 4.0)],
    )
    names = [b.name for b in evaluate_bands(CONFIG, early_zero, "regret")]
    assert names == ["regret_envelope"], names
    print("✓ Zero early median regret skips the sublinearity band")
    print()


def run_all_tests():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("ACCEPTANCE TEST SUITE")
    print("=" * 60)
    print()

    try:
        test_envelopes()
        test_synthetic_bands()
        test_mode_and_kind_handling()
        test_degenerate_regret()

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
