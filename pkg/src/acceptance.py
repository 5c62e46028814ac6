"""
Acceptance bands evaluated on aggregate reports, and the regret envelopes
they compare against.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from bandit_env import BanditInstance
from errors import DomainError
from experiment_config import Bands, ExperimentConfig
from experiment_engine import AggregateReport, CheckpointSummary
from policies import PolicyMode

BAND_KINDS = ("stability", "coverage", "regret")


@dataclass(frozen=True)
class BandResult:
    name: str
    value: float
    lower: float
    upper: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "pass": self.passed,
        }

    def describe(self) -> str:
        verdict = "ok" if self.passed else "VIOLATED"
        return f"{self.name}: {self.value:.6g} in [{self.lower:.6g}, {self.upper:.6g}] {verdict}"


def _band(name: str, value: Optional[float], lower: float, upper: float) -> BandResult:
    # a missing or NaN value never passes
    ok = value is not None and math.isfinite(value) and lower <= value <= upper
    return BandResult(name=name, value=math.nan if value is None else value, lower=lower, upper=upper, passed=ok)


def lem3_envelope(instance: BanditInstance, sigma_A: float, horizon: int) -> float:
    """sum over suboptimal arms of sigma log(T gap^2 / sigma) / gap^2, constant 1"""
    if not sigma_A > 0.0 or horizon < 2:
        raise DomainError("the variance-inflation envelope needs sigma > 0 and T >= 2")
    terms = []
    for arm, gap in instance.gaps.items():
        if gap > 0.0:
            terms.append(sigma_A * max(math.log(horizon * gap * gap / sigma_A), 0.0) / (gap * gap))
    return math.fsum(terms)


def mean_bonus_envelope(instance: BanditInstance, beta_A: float, horizon: int) -> float:
    """sum over suboptimal arms of 2 beta (1 + beta^(-1/4)) log T / gap"""
    if not beta_A > 0.0 or horizon < 2:
        raise DomainError("the mean-bonus envelope needs beta > 0 and T >= 2")
    scale = 2.0 * beta_A * (1.0 + beta_A ** -0.25) * math.log(horizon)
    return math.fsum(scale / gap for gap in instance.gaps.values() if gap > 0.0)


def regret_envelope(config: ExperimentConfig, report: AggregateReport) -> Optional[float]:
    instance = config.instance()
    if config.mode is PolicyMode.VARIANCE_INFLATED:
        return lem3_envelope(instance, report.metadata["sigma_A"], config.horizon)
    if config.mode is PolicyMode.MEAN_BONUS and report.metadata["beta_A"] > 0.0:
        return mean_bonus_envelope(instance, report.metadata["beta_A"], config.horizon)
    return None


def _early_checkpoint(report: AggregateReport, horizon: int) -> Optional[CheckpointSummary]:
    """Latest checkpoint at or before T/10"""
    early = [c for c in report.checkpoints if c.time <= horizon / 10]
    return early[-1] if early else None


def stability_bands(config: ExperimentConfig, report: AggregateReport, bands: Bands) -> List[BandResult]:
    final = report.final()
    instance = config.instance()
    results = []
    for arm in final.arms:
        if arm.ratio is None:
            continue
        lower, upper = bands.optimal_ratio if instance.is_optimal(arm.arm) else bands.suboptimal_ratio
        results.append(_band(f"stability_ratio_arm{arm.arm}", arm.ratio.median, lower, upper))
    return results


def coverage_bands(config: ExperimentConfig, report: AggregateReport, bands: Bands) -> List[BandResult]:
    results = []
    for arm in report.final().arms:
        results.append(_band(f"coverage_arm{arm.arm}", arm.coverage, *bands.coverage))
        results.append(_band(f"ks_pvalue_arm{arm.arm}", arm.ks_pvalue, bands.ks_level, 1.0))
    return results


def regret_bands(config: ExperimentConfig, report: AggregateReport, bands: Bands) -> List[BandResult]:
    """
    Envelope and sublinearity bands. An instance without suboptimal arms
    has zero regret on every path and gets neither.
    """
    results = []
    if not config.instance().gaps:
        return results
    final = report.final()
    envelope = regret_envelope(config, report)
    if envelope is not None:
        results.append(_band("regret_envelope", final.regret_mean, 0.0, bands.regret_slack * envelope))
    early = _early_checkpoint(report, config.horizon)
    # a zero early median leaves no room for a strictly smaller rate
    if early is not None and early.regret_median > 0.0:
        late_rate = final.regret_median / final.time
        early_rate = early.regret_median / early.time
        # strict inequality: the upper end is the next float below the early rate
        results.append(_band("regret_sublinear", late_rate, 0.0, math.nextafter(early_rate, -math.inf)))
    return results


def evaluate_bands(
    config: ExperimentConfig,
    report: AggregateReport,
    kind: str
) -> List[BandResult]:
    """
    Acceptance bands of one kind. Vanilla TS has no stability or coverage
    theory behind it and gets no bands.
    """
    if kind not in BAND_KINDS:
        raise DomainError(f"unknown band kind {kind!r}; expected one of {BAND_KINDS}")
    if not config.mode.is_optimistic:
        return []
    if kind == "stability":
        return stability_bands(config, report, config.bands)
    if kind == "coverage":
        return coverage_bands(config, report, config.bands)
    return regret_bands(config, report, config.bands)


def violated(results: List[BandResult]) -> List[BandResult]:
    return [r for r in results if not r.passed]
