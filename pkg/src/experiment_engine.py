"""
Monte Carlo replication runner, aggregation and persistence.

Replications are simulated in lockstep batches: every array carries one row
per replication, and each row draws only from that replication's own
streams. Arithmetic is elementwise, so a replication's trajectory is
bitwise-identical whichever batch or thread it lands in.
"""

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from bandit_env import BanditInstance
from errors import DomainError, ReportIOError
from experiment_config import LAB_VERSION, ExperimentConfig
from inference import (
    ArmEstimate,
    WaldInterval,
    arm_estimate,
    coverage_tally,
    ks_against_normal,
    studentized,
    wald_ci,
)
from lab_logger import get_logger
from lemma_suite import LemmaReport
from policies import PolicyMode, PolicyState, growth_diagnostics, index_values, init_policy
from stability_lab import lyapunov_v, optimal_share_spread, stability_ratios, stability_target
from stats_core import INDEX_LANE_BASE, REWARD_LANE, ReplicationStreams

_log = get_logger()

TRAJECTORY_COLUMNS = ["rep", "checkpoint", "arm", "count", "mean", "std", "ci_lo", "ci_hi", "regret"]

# Upper bound on pre-drawn index noise per batch block (float64 entries).
NOISE_BLOCK_BUDGET = 1 << 21
MAX_BLOCK_ROUNDS = 4096


@dataclass
class CheckpointRecord:
    """State of one replication after ``time`` rounds"""
    time: int
    counts: List[int]
    estimates: List[ArmEstimate]
    intervals: List[WaldInterval]
    regret: float


@dataclass
class TrajectoryRecord:
    rep_id: int
    lineage: Dict[str, Any]
    checkpoints: List[CheckpointRecord] = field(default_factory=list)

    def final(self) -> CheckpointRecord:
        return self.checkpoints[-1]


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count from the argument or OTS_LAB_THREADS (0 or unset = all CPUs)"""
    if requested is None:
        raw = os.environ.get("OTS_LAB_THREADS", "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError:
            raise DomainError(f"OTS_LAB_THREADS must be an integer, got {raw!r}")
    if requested < 0:
        raise DomainError(f"worker count must be >= 0, got {requested}")
    return requested or (os.cpu_count() or 1)


def _policy_template(config: ExperimentConfig) -> PolicyState:
    return init_policy(config.mode, config.n_arms, config.horizon, config.sigma, config.beta)


def _lineage(config: ExperimentConfig, rep_id: int) -> Dict[str, Any]:
    return {
        "master_seed": config.seed,
        "stream_id": rep_id,
        "reward_substream": REWARD_LANE,
        "index_substreams": [INDEX_LANE_BASE + a for a in range(config.n_arms)],
    }


def simulate_batch(config: ExperimentConfig, rep_ids: Sequence[int]) -> List[TrajectoryRecord]:
    """Simulate the given replications in lockstep"""
    instance = config.instance()
    template = _policy_template(config)
    n_reps, n_arms, horizon = len(rep_ids), config.n_arms, config.horizon
    log_horizon = template.log_horizon

    means = np.asarray(instance.means, dtype=np.float64)
    gaps = instance.gap_vector()
    counts = np.zeros((n_reps, n_arms), dtype=np.int64)
    sums = np.zeros((n_reps, n_arms), dtype=np.float64)
    sumsq = np.zeros((n_reps, n_arms), dtype=np.float64)
    regret = np.zeros(n_reps, dtype=np.float64)
    rows = np.arange(n_reps)
    streams = [ReplicationStreams(config.seed, rep, n_arms) for rep in rep_ids]
    checkpoint_set = set(config.checkpoints)
    snapshots: Dict[int, tuple] = {}

    def play(arms: np.ndarray, noise: np.ndarray) -> None:
        rewards = means[arms] + noise
        counts[rows, arms] += 1
        sums[rows, arms] += rewards
        sumsq[rows, arms] += rewards * rewards
        regret[:] += gaps[arms]

    def snapshot(t: int) -> None:
        if t in checkpoint_set:
            snapshots[t] = (counts.copy(), sums.copy(), sumsq.copy(), regret.copy())

    # forced initialization: arm t at round t, no index draws
    init_noise = np.stack([s.reward.standard_normal(n_arms) for s in streams])
    for t in range(n_arms):
        play(np.full(n_reps, t, dtype=np.int64), init_noise[:, t])
        snapshot(t + 1)

    block = max(16, min(MAX_BLOCK_ROUNDS, NOISE_BLOCK_BUDGET // (n_reps * n_arms)))
    t = n_arms
    while t < horizon:
        rounds = min(block, horizon - t)
        reward_noise = np.stack([s.reward.standard_normal(rounds) for s in streams])
        index_noise = np.stack([
            np.stack([lane.standard_normal(rounds) for lane in s.index], axis=1)
            for s in streams
        ])
        for j in range(rounds):
            theta = index_values(
                config.mode, sums, counts, index_noise[:, j, :],
                template.sigma_A, template.beta_A, log_horizon
            )
            play(np.argmax(theta, axis=1), reward_noise[:, j])
            t += 1
            snapshot(t)

    records = []
    for row, rep_id in enumerate(rep_ids):
        record = TrajectoryRecord(rep_id=rep_id, lineage=_lineage(config, rep_id))
        for time in config.checkpoints:
            c, s, q, reg = snapshots[time]
            estimates = [
                arm_estimate(int(c[row, a]), float(s[row, a]), float(q[row, a])) for a in range(n_arms)
            ]
            record.checkpoints.append(CheckpointRecord(
                time=time,
                counts=[int(n) for n in c[row]],
                estimates=estimates,
                intervals=[wald_ci(est, config.alpha) for est in estimates],
                regret=float(reg[row]),
            ))
        records.append(record)
    return records


def run_replication(config: ExperimentConfig, rep_id: int) -> TrajectoryRecord:
    """One full trajectory, deterministic in (seed, rep_id)"""
    if rep_id < 0:
        raise DomainError(f"replication ids are nonnegative, got {rep_id}")
    return simulate_batch(config, [rep_id])[0]


def run_replications(config: ExperimentConfig, workers: Optional[int] = None) -> List[TrajectoryRecord]:
    """All R replications, split into contiguous batches over a thread pool"""
    workers = resolve_workers(workers)
    rep_ids = list(range(config.replications))
    n_batches = min(workers, len(rep_ids))
    size = math.ceil(len(rep_ids) / n_batches)
    batches = [rep_ids[i:i + size] for i in range(0, len(rep_ids), size)]
    run_id = config.config_hash()[:12]

    _log.info(
        "run_experiment",
        f"Simulating {config.replications} replications of {config.mode.value}",
        details={"T": config.horizon, "K": config.n_arms, "workers": workers, "batches": len(batches)},
        run_id=run_id
    )

    def run_batch(batch: List[int]) -> List[TrajectoryRecord]:
        records = simulate_batch(config, batch)
        _log.debug("run_batch", "Batch finished", run_id=run_id, replications=(batch[0], batch[-1]))
        return records

    if len(batches) == 1:
        results = [run_batch(batches[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(batches)) as pool:
            results = list(pool.map(run_batch, batches))

    records = [record for batch in results for record in batch]
    records.sort(key=lambda r: r.rep_id)
    return records


# ==================== AGGREGATION ====================

@dataclass
class QuantileSummary:
    mean: float
    median: float
    q05: float
    q25: float
    q75: float
    q95: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "QuantileSummary":
        data = np.sort(np.asarray(values, dtype=np.float64))
        q05, q25, q50, q75, q95 = np.quantile(data, [0.05, 0.25, 0.5, 0.75, 0.95])
        return cls(
            mean=math.fsum(data) / data.size,
            median=float(q50), q05=float(q05), q25=float(q25), q75=float(q75), q95=float(q95),
        )

    def to_dict(self) -> Dict[str, float]:
        return dict(self.__dict__)


@dataclass
class ArmSummary:
    arm: int
    count_mean: float
    ratio: Optional[QuantileSummary]
    coverage: float
    studentized_mean: float
    studentized_std: float
    ks_statistic: float
    ks_pvalue: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "arm": self.arm,
            "count_mean": self.count_mean,
            "ratio": self.ratio.to_dict() if self.ratio else None,
            "coverage": self.coverage,
            "studentized_mean": self.studentized_mean,
            "studentized_std": self.studentized_std,
            "ks_statistic": self.ks_statistic,
            "ks_pvalue": self.ks_pvalue,
        }


@dataclass
class CheckpointSummary:
    time: int
    regret_mean: float
    regret_se: float
    regret_median: float
    lyapunov_median: Optional[float]
    share_spread_median: Optional[float]
    arms: List[ArmSummary]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "time": self.time,
            "regret_mean": self.regret_mean,
            "regret_se": self.regret_se,
            "regret_median": self.regret_median,
            "lyapunov_median": self.lyapunov_median,
            "share_spread_median": self.share_spread_median,
            "arms": [arm.to_dict() for arm in self.arms],
        }


@dataclass
class AggregateReport:
    metadata: Dict[str, Any]
    targets: Optional[List[float]]
    checkpoints: List[CheckpointSummary]

    def final(self) -> CheckpointSummary:
        return self.checkpoints[-1]

    def at(self, time: int) -> Optional[CheckpointSummary]:
        for summary in self.checkpoints:
            if summary.time == time:
                return summary
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metadata": self.metadata,
            "targets": self.targets,
            "checkpoints": [c.to_dict() for c in self.checkpoints],
        }


def _mean_and_se(values: Sequence[float]) -> tuple:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(variance / n)


def _c_A(template: PolicyState) -> float:
    if template.mode is PolicyMode.VARIANCE_INFLATED:
        return template.sigma_A
    return template.beta_A


def aggregate_records(config: ExperimentConfig, records: Sequence[TrajectoryRecord]) -> AggregateReport:
    """
    Summaries per checkpoint and arm.

    Records are ordered by replication id and sums use exactly rounded
    ``math.fsum``, so the report does not depend on how replications were
    scheduled.
    """
    if not records:
        raise DomainError("cannot aggregate zero replications")
    records = sorted(records, key=lambda r: r.rep_id)
    instance: BanditInstance = config.instance()
    template = _policy_template(config)
    c_A = _c_A(template)
    has_targets = config.mode.is_optimistic and c_A > 0.0

    summaries = []
    for k, time in enumerate(config.checkpoints):
        cells = [record.checkpoints[k] for record in records]
        target = stability_target(instance, config.mode, time, c_A) if has_targets and time >= 3 else None

        regrets = [cell.regret for cell in cells]
        regret_mean, regret_se = _mean_and_se(regrets)
        lyapunov = spread = None
        if instance.m >= 2:
            optimal = list(instance.optimal_set)
            lyapunov = float(np.median([lyapunov_v([cell.counts[a] for a in optimal]) for cell in cells]))
            spread = float(np.median([optimal_share_spread(cell.counts, optimal) for cell in cells]))

        arms = []
        for a in range(config.n_arms):
            stats = [studentized(cell.estimates[a], instance.means[a]) for cell in cells]
            finite = [s for s in stats if math.isfinite(s)]
            stud_mean, _ = _mean_and_se(finite) if finite else (math.nan, 0.0)
            stud_std = (
                math.sqrt(math.fsum((s - stud_mean) ** 2 for s in finite) / (len(finite) - 1))
                if len(finite) > 1 else 0.0
            )
            ks_stat, ks_p = ks_against_normal(stats)
            ratios = None
            if target is not None:
                ratios = QuantileSummary.of([stability_ratios(cell.counts, target)[a] for cell in cells])
            arms.append(ArmSummary(
                arm=a,
                count_mean=math.fsum(cell.counts[a] for cell in cells) / len(cells),
                ratio=ratios,
                coverage=coverage_tally([cell.intervals[a] for cell in cells], [instance.means[a]] * len(cells)),
                studentized_mean=stud_mean,
                studentized_std=stud_std,
                ks_statistic=ks_stat,
                ks_pvalue=ks_p,
            ))

        summaries.append(CheckpointSummary(
            time=time,
            regret_mean=regret_mean,
            regret_se=regret_se,
            regret_median=float(np.median(regrets)),
            lyapunov_median=lyapunov,
            share_spread_median=spread,
            arms=arms,
        ))

    final_target = (
        stability_target(instance, config.mode, config.horizon, c_A).targets if has_targets else None
    )
    metadata = {
        "config_hash": config.config_hash(),
        "lab_version": LAB_VERSION,
        "mode": config.mode.value,
        "T": config.horizon,
        "K": config.n_arms,
        "replications": len(records),
        "alpha": config.alpha,
        "sigma_A": template.sigma_A,
        "beta_A": template.beta_A,
        "instance": instance.to_dict(),
        "growth": growth_diagnostics(config.mode, c_A, config.horizon),
        "seed_lineage": {
            "master_seed": config.seed,
            "stream_ids": [records[0].rep_id, records[-1].rep_id],
            "reward_substream": REWARD_LANE,
            "index_substreams": [INDEX_LANE_BASE + a for a in range(config.n_arms)],
        },
    }
    return AggregateReport(
        metadata=metadata,
        targets=list(final_target) if final_target else None,
        checkpoints=summaries,
    )


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> AggregateReport:
    report = aggregate_records(config, run_replications(config, workers))
    _log.info(
        "run_experiment",
        "Experiment finished",
        details={"final_regret_mean": report.final().regret_mean},
        run_id=report.metadata["config_hash"][:12]
    )
    return report


# ==================== PERSISTENCE ====================

def json_ready(value: Any) -> Any:
    """Replace non-finite floats with None so the output is strict JSON"""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    return value


def _atomic_write_text(path: Path, text: str) -> None:
    """Write through a temp file in the same directory, then rename over the target"""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise ReportIOError(f"cannot write {path.name} ({exc.strerror or exc})", path)


def trajectories_csv(records: Sequence[TrajectoryRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for record in sorted(records, key=lambda r: r.rep_id):
        for cp in record.checkpoints:
            for arm, (est, ci) in enumerate(zip(cp.estimates, cp.intervals)):
                writer.writerow([
                    record.rep_id, cp.time, arm, cp.counts[arm],
                    repr(est.mean), repr(est.sample_std), repr(ci.lower), repr(ci.upper), repr(cp.regret),
                ])
    return buffer.getvalue()


def dump_json(payload: Dict[str, Any]) -> str:
    return json.dumps(json_ready(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(
    report: Optional[AggregateReport],
    trajectories: Optional[Sequence[TrajectoryRecord]],
    out_dir: Union[str, Path],
    lemma_report: Optional[LemmaReport] = None
) -> Dict[str, str]:
    """
    Persist trajectories.csv, aggregate.json and lemmas.json (when given).

    Returns the written paths keyed by artifact name.
    """
    out_dir = Path(out_dir)
    written = {}
    if trajectories is not None:
        path = out_dir / "trajectories.csv"
        _atomic_write_text(path, trajectories_csv(trajectories))
        written["trajectories"] = str(path)
    if report is not None:
        path = out_dir / "aggregate.json"
        _atomic_write_text(path, dump_json(report.to_dict()))
        written["aggregate"] = str(path)
    if lemma_report is not None:
        path = out_dir / "lemmas.json"
        _atomic_write_text(path, dump_json(lemma_report.to_dict()))
        written["lemmas"] = str(path)
    _log.info("write_report", f"Wrote {len(written)} artifacts", details=written)
    return written


def read_trajectories(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Parse trajectories.csv back into typed rows"""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != TRAJECTORY_COLUMNS:
                raise ReportIOError(f"unexpected trajectory header {reader.fieldnames}", path)
            rows = []
            for row in reader:
                rows.append({
                    "rep": int(row["rep"]),
                    "checkpoint": int(row["checkpoint"]),
                    "arm": int(row["arm"]),
                    "count": int(row["count"]),
                    **{key: float(row[key]) for key in ("mean", "std", "ci_lo", "ci_hi", "regret")},
                })
            return rows
    except OSError as exc:
        raise ReportIOError(f"cannot read trajectories ({exc.strerror or exc})", path)
