#!/usr/bin/env python3
"""
Command-line entry point for the optimistic Thompson sampling lab.

Examples:
  python src/cli.py simulate --config configs/default.json --reps 1 --seed 7
  python src/cli.py stability --config configs/stability_b.json
  python src/cli.py lemmas --out out/lemmas

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 acceptance band violated.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Callable, List, Optional, Sequence

from dotenv import load_dotenv

from acceptance import BandResult, evaluate_bands, regret_envelope, violated
from errors import ConfigError, DomainError, ReportIOError
from experiment_config import ExperimentConfig
from experiment_engine import AggregateReport, aggregate_records, run_replications, write_report
from lab_logger import LogLevel, get_logger
from lemma_suite import LemmaReport, LemmaSettings, run_lemma_suite

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_BAND = 3

COMMANDS = ("simulate", "coverage", "stability", "regret", "lemmas", "all")

_log = get_logger()

Printer = Callable[[str], None]


class LabArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the lab reserves 2 for I/O errors"""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INVALID)


def build_parser() -> LabArgumentParser:
    common = LabArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON)")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--reps", type=int, help="replication count (overrides the config)")
    common.add_argument("--quiet", action="store_true", help="no summary on stdout")

    parser = LabArgumentParser(
        prog="ots-lab",
        description="Monte Carlo lab for optimistic Gaussian Thompson sampling",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    helps = {
        "simulate": "run replications and write trajectories.csv / aggregate.json",
        "coverage": "simulate and check Wald interval coverage",
        "stability": "simulate and check pull-count ratios against their targets",
        "regret": "simulate and compare regret against its envelope",
        "lemmas": "run the numerical lemma checks and write lemmas.json",
        "all": "everything above in one run",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


# ==================== SUMMARIES ====================

def _print_header(say: Printer, config: ExperimentConfig, report: AggregateReport) -> None:
    meta = report.metadata
    say("=" * 60)
    say(f"{config.mode.value}  K={config.n_arms}  T={config.horizon}  R={meta['replications']}  seed={config.seed}")
    say(f"sigma_A={meta['sigma_A']:.6g}  beta_A={meta['beta_A']:.6g}  config={meta['config_hash'][:12]}")
    say("=" * 60)


def print_coverage(say: Printer, config: ExperimentConfig, report: AggregateReport) -> None:
    say(f"\nWald coverage at T={config.horizon} (nominal {1.0 - config.alpha:.3f})")
    for arm in report.final().arms:
        say(f"  arm {arm.arm}: coverage={arm.coverage:.4f}  KS p={arm.ks_pvalue:.4f}  "
            f"studentized mean={arm.studentized_mean:+.4f} std={arm.studentized_std:.4f}")


def print_stability(say: Printer, config: ExperimentConfig, report: AggregateReport) -> None:
    if report.targets is None:
        say("\nNo stability targets for this policy")
    else:
        say("\nPull-count ratios N_a / N*_a")
        for summary in report.checkpoints:
            for arm in summary.arms:
                if arm.ratio is None:
                    continue
                r = arm.ratio
                say(f"  t={summary.time:<8d} arm {arm.arm}: median={r.median:.4f}  "
                    f"[q05={r.q05:.4f}, q95={r.q95:.4f}]")
    for summary in report.checkpoints:
        if summary.lyapunov_median is not None:
            say(f"  t={summary.time:<8d} median V={summary.lyapunov_median:.6g}  "
                f"median optimal-share spread={summary.share_spread_median:.4f}")


def print_regret(say: Printer, config: ExperimentConfig, report: AggregateReport) -> None:
    say("\nRegret curve (mean +/- SE, median)")
    for summary in report.checkpoints:
        say(f"  t={summary.time:<8d} {summary.regret_mean:.4f} +/- {summary.regret_se:.4f}  "
            f"median={summary.regret_median:.4f}")
    envelope = regret_envelope(config, report)
    if envelope is not None:
        say(f"  envelope at T: {envelope:.4f} (slack {config.bands.regret_slack:g})")


def print_lemmas(say: Printer, report: LemmaReport) -> None:
    say("\nLemma checks")
    for check in report.checks:
        verdict = "pass" if check.passed else "FAIL"
        tag = " (diagnostic)" if check.diagnostic else ""
        say(f"  {verdict:4s} {check.name}{tag}: worst={check.worst_violation:.3g} tol={check.tolerance:.3g}")


def print_bands(say: Printer, results: Sequence[BandResult]) -> None:
    if not results:
        return
    say("\nAcceptance bands")
    for result in results:
        say(f"  {result.describe()}")


# ==================== COMMANDS ====================

def _load_config(args: argparse.Namespace, required: bool = True) -> Optional[ExperimentConfig]:
    if args.config is None:
        if required:
            raise ConfigError(f"{args.command} needs --config")
        return None
    config = ExperimentConfig.from_file(args.config)
    return config.with_overrides(
        seed=args.seed,
        replications=args.reps,
        output_dir=str(args.out) if args.out is not None else None,
    )


def _lemmas(args: argparse.Namespace, config: Optional[ExperimentConfig]) -> LemmaReport:
    settings = config.lemmas if config else LemmaSettings()
    seed = args.seed if args.seed is not None else (config.seed if config else 0)
    return run_lemma_suite(settings, seed=seed)


def dispatch(args: argparse.Namespace, say: Printer) -> int:
    command = args.command
    config = _load_config(args, required=command != "lemmas")
    out_dir = Path(config.output_dir) if config else (args.out or Path("out"))

    report = records = lemma_report = None
    bands: List[BandResult] = []

    if command != "lemmas":
        records = run_replications(config)
        report = aggregate_records(config, records)
        _print_header(say, config, report)
        kinds = ["coverage", "stability", "regret"] if command == "all" else [command]
        printers = {"coverage": print_coverage, "stability": print_stability, "regret": print_regret}
        for kind in kinds:
            if kind == "simulate":
                print_regret(say, config, report)
                continue
            printers[kind](say, config, report)
            bands.extend(evaluate_bands(config, report, kind))

    if command in ("lemmas", "all"):
        lemma_report = _lemmas(args, config)
        print_lemmas(say, lemma_report)
        bands.extend(
            BandResult(name=f"lemma_{c.name}", value=c.worst_violation, lower=-float("inf"),
                       upper=0.0, passed=c.passed)
            for c in lemma_report.checks
        )

    written = write_report(report, records, out_dir, lemma_report)
    print_bands(say, bands)
    say("")
    for name, path in written.items():
        say(f"wrote {name}: {path}")

    failed = violated(bands)
    if failed:
        # named on stderr as well so --quiet runs still say what broke
        for result in failed:
            sys.stderr.write(f"band violated: {result.name}\n")
        return EXIT_BAND
    return EXIT_OK


def _configure_logging(quiet: bool) -> None:
    level = os.environ.get("OTS_LAB_LOG_LEVEL")
    if level:
        try:
            _log.set_console_level(LogLevel(level.strip().lower()))
        except ValueError:
            raise ConfigError(f"OTS_LAB_LOG_LEVEL must be one of {[l.value for l in LogLevel]}, got {level!r}")
    if quiet:
        _log.set_console_level(LogLevel.WARNING)


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID

    say: Printer = (lambda line: None) if args.quiet else print
    try:
        _configure_logging(args.quiet)
        return dispatch(args, say)
    except (ConfigError, DomainError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except ReportIOError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc.filename or ''} {exc.strerror or exc}\n")
        return EXIT_IO
    finally:
        _log.set_console_level(LogLevel.INFO)


if __name__ == "__main__":
    sys.exit(main())
