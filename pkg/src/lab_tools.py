"""
MCP tools exposing the lab: experiments, stability targets, winner maps,
Wald intervals, the lemma suite and the log buffer.

Failures come back as {"error": message} payloads instead of exceptions.
"""

import asyncio
from pathlib import Path
from typing import Any, Dict, List, Optional

from mcp.server.fastmcp import FastMCP

from acceptance import evaluate_bands, violated
from bandit_env import make_instance
from errors import LabError
from experiment_config import ExperimentConfig
from experiment_engine import aggregate_records, json_ready, run_replications, write_report
from inference import arm_estimate, wald_ci
from lab_logger import LogLevel, get_logger
from lemma_suite import LemmaSettings, run_lemma_suite
from policies import PolicyMode
from stability_lab import SimplexPoint, stability_target, winner_map_quadrature

_log = get_logger()


def _error(operation: str, exc: Exception) -> Dict[str, Any]:
    _log.error(operation, str(exc))
    return {"error": str(exc)}


def run_experiment_payload(
    config_path: str,
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    reps: Optional[int] = None
) -> Dict[str, Any]:
    config = ExperimentConfig.from_file(config_path).with_overrides(
        seed=seed, replications=reps, output_dir=out_dir
    )
    records = run_replications(config)
    report = aggregate_records(config, records)
    written = write_report(report, records, config.output_dir)
    bands = []
    for kind in ("stability", "coverage", "regret"):
        bands.extend(evaluate_bands(config, report, kind))
    return json_ready({
        "config_hash": report.metadata["config_hash"],
        "files": written,
        "final": report.final().to_dict(),
        "targets": report.targets,
        "bands": [b.to_dict() for b in bands],
        "violated": [b.name for b in violated(bands)],
    })


def register_lab_tools(mcp: FastMCP) -> None:
    """Register all lab tools with the MCP server"""

    # ==================== EXPERIMENTS ====================

    @mcp.tool()
    async def lab_run_experiment(
        config_path: str,
        out_dir: Optional[str] = None,
        seed: Optional[int] = None,
        reps: Optional[int] = None
    ) -> Dict[str, Any]:
        """
        Run a Monte Carlo experiment from a JSON config and write its reports.

        Args:
            config_path: Path to the experiment config
            out_dir: Output directory (config's output_dir if None)
            seed: Master seed override
            reps: Replication count override

        Returns:
            Final-checkpoint summary, acceptance bands and written file paths
        """
        try:
            return await asyncio.to_thread(run_experiment_payload, config_path, out_dir, seed, reps)
        except (LabError, OSError) as exc:
            return _error("lab_run_experiment", exc)

    @mcp.tool()
    async def lab_run_lemmas(
        config_path: Optional[str] = None,
        out_dir: Optional[str] = None,
        seed: int = 0
    ) -> Dict[str, Any]:
        """
        Run the numerical lemma checks.

        Args:
            config_path: Config whose "lemmas" block sets grid sizes (defaults if None)
            out_dir: Write lemmas.json here when given
            seed: Seed for the Monte Carlo lanes

        Returns:
            The lemma report
        """
        try:
            settings = ExperimentConfig.from_file(config_path).lemmas if config_path else LemmaSettings()
            report = await asyncio.to_thread(run_lemma_suite, settings, seed)
            payload = json_ready(report.to_dict())
            if out_dir:
                payload["files"] = write_report(None, None, Path(out_dir), report)
            return payload
        except (LabError, OSError) as exc:
            return _error("lab_run_lemmas", exc)

    # ==================== PRIMITIVES ====================

    @mcp.tool()
    async def lab_stability_target(
        means: List[float],
        mode: str,
        T: int,
        c_A: float
    ) -> Dict[str, Any]:
        """
        Deterministic pull-count targets: T/m for optimal arms, 2 c_A log T / gap^2 otherwise.

        Args:
            means: Arm means
            mode: variance_inflated or mean_bonus (vanilla has no target)
            T: Horizon
            c_A: sigma_A or beta_A at this horizon

        Returns:
            Targets per arm
        """
        try:
            target = stability_target(make_instance(means), PolicyMode.parse(mode), T, c_A)
            return target.to_dict()
        except LabError as exc:
            return _error("lab_stability_target", exc)

    @mcp.tool()
    async def lab_winner_map(x: List[float], node_count: int = 256) -> Dict[str, Any]:
        """
        Probability that each Z_i / sqrt(x_i) is the largest, by quadrature.

        Args:
            x: Interior simplex point (positive, sums to 1)
            node_count: Gauss-Hermite nodes (at least 64)
        """
        try:
            point = SimplexPoint(tuple(x))
            g = winner_map_quadrature(point, node_count)
            return {"x": list(point.x), "g": [float(v) for v in g], "sum": float(g.sum())}
        except LabError as exc:
            return _error("lab_winner_map", exc)

    @mcp.tool()
    async def lab_wald_ci(n: int, sums: float, sumsq: float, alpha: float = 0.05) -> Dict[str, Any]:
        """
        Wald interval from one arm's sufficient statistics.

        Args:
            n: Pull count
            sums: Sum of rewards
            sumsq: Sum of squared rewards
            alpha: 1 - confidence level
        """
        try:
            est = arm_estimate(n, sums, sumsq)
            return {"estimate": est.to_dict(), "interval": wald_ci(est, alpha).to_dict()}
        except LabError as exc:
            return _error("lab_wald_ci", exc)

    # ==================== LOGS ====================

    @mcp.tool()
    async def lab_get_logs(
        count: int = 100,
        level: Optional[str] = None,
        run_id: Optional[str] = None,
        operation: Optional[str] = None
    ) -> Dict[str, Any]:
        """
        Get recent lab log entries.

        Args:
            count: Maximum number of entries (default: 100)
            level: debug, info, warning or error. None = all levels
            run_id: 12-character config hash prefix. None = all runs
            operation: e.g. run_experiment, run_batch, lemma_check. None = all
        """
        try:
            level_enum = LogLevel(level.lower()) if level else None
        except ValueError:
            return {"error": f"unknown log level {level!r}"}
        logs = _log.get_recent(count=count, level=level_enum, run_id=run_id, operation=operation)
        return {"logs": logs, "count": len(logs)}

    @mcp.tool()
    async def lab_get_log_stats() -> Dict[str, Any]:
        """Counts of buffered log entries by level and operation, and the runs they came from"""
        return _log.get_stats()

    @mcp.tool()
    async def lab_clear_logs() -> Dict[str, Any]:
        """Clear the log buffer"""
        dropped = _log.clear()
        return {"status": "cleared", "dropped": dropped}
