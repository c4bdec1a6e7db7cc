"""Command line entry point: ``hybridnav {run,batch,compare-ekf,jactest}``."""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from hybridnav.config import ScenarioConfig, load_config
from hybridnav.diagnostics import jacobian_report
from hybridnav.simloop import (
    BatchResult,
    TrajectoryLog,
    aggregate,
    json_safe,
    run_batch,
    run_scenario,
)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {text}")
    return value


def _scenario(args: argparse.Namespace) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if getattr(args, "runs", None) is not None:
        cfg = cfg.replace(runs=args.runs)
    return cfg


def _records_json(log: TrajectoryLog) -> str:
    rows = [{k: json_safe(v) for k, v in rec._asdict().items()} for rec in log.records]
    return json.dumps(rows) + "\n"


def _write_logs(logs: list[TrajectoryLog], out: Path, fmt: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for log in logs:
        stem = f"run_{log.summary.seed}"
        if fmt == "csv":
            (out / f"{stem}.csv").write_text(log.to_csv(), encoding="utf-8")
        else:
            (out / f"{stem}.json").write_text(_records_json(log), encoding="utf-8")


def _emit(result: BatchResult, args: argparse.Namespace) -> None:
    text = result.summary_json()
    if args.out:
        out = Path(args.out)
        _write_logs(result.logs, out, args.format)
        (out / "summary.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _scenario(args)
    log = run_scenario(cfg)
    _emit(BatchResult([log], aggregate([log.summary])), args)
    return 0 if log.summary.status != "aborted" else 1


def cmd_batch(args: argparse.Namespace) -> int:
    _emit(run_batch(_scenario(args)), args)
    return 0


def compare_ekf(cfg: ScenarioConfig) -> dict:
    """Paired runs with and without the estimator on identical noise streams.

    The estimator-on arm also carries a dead-reckoned pose alongside, so
    each seed yields the ratio RMSE(estimate) / RMSE(dead reckoning) on the
    same trajectory, plus the closed-loop outcome of steering on dead
    reckoning alone.
    """
    with_ekf = run_batch(cfg.replace(estimator_enabled=True))
    without = run_batch(cfg.replace(estimator_enabled=False))
    runs = []
    for a, b in zip(with_ekf.logs, without.logs):
        sa, sb = a.summary, b.summary
        ratio = sa.rmse_estimate / sa.rmse_dead_reckoning if sa.rmse_dead_reckoning else None
        runs.append(
            {
                "seed": sa.seed,
                "rmse_estimate": json_safe(sa.rmse_estimate),
                "rmse_dead_reckoning": json_safe(sa.rmse_dead_reckoning),
                "ratio": json_safe(ratio) if ratio is not None else None,
                "ekf_better": bool(ratio is not None and ratio < 1.0),
                "final_position_error_ekf": json_safe(sa.final_position_error),
                "final_position_error_no_ekf": json_safe(sb.final_position_error),
            }
        )
    ratios = [r["ratio"] for r in runs if r["ratio"] is not None]
    return {
        "runs": len(runs),
        "ekf_better": sum(r["ekf_better"] for r in runs),
        "median_ratio": statistics.median(ratios) if ratios else None,
        "with_ekf": {k: json_safe(v) for k, v in with_ekf.aggregate.items()},
        "without_ekf": {k: json_safe(v) for k, v in without.aggregate.items()},
        "paired": runs,
    }


def cmd_compare_ekf(args: argparse.Namespace) -> int:
    text = json.dumps(compare_ekf(_scenario(args)), indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare_ekf.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_jactest(args: argparse.Namespace) -> int:
    cfg = _scenario(args)
    report = jacobian_report(args.samples, cfg.seed, cfg.robot, args.tolerance)
    if args.format == "json":
        doc = {"samples": report.samples, "tolerance": report.tolerance,
               "max_relative_error": report.max_error, "passed": report.passed}
        text = json.dumps(doc, indent=2) + "\n"
    else:
        text = "\n".join(report.lines()) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / ("jactest.json" if args.format == "json" else "jactest.txt")).write_text(
            text, encoding="utf-8"
        )
    sys.stdout.write(text)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario YAML file (defaults used when omitted)")
    common.add_argument("--seed", type=_u64, help="base seed, overrides the config")
    common.add_argument("--out", help="directory for per-run logs and summaries")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="per-run trajectory format (default: csv)")

    parser = argparse.ArgumentParser(
        prog="hybridnav", description="Hybrid Lyapunov control with EKF localization, simulated."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate one scenario").set_defaults(
        func=cmd_run
    )
    p = sub.add_parser("batch", parents=[common], help="Monte Carlo batch, seeds seed..seed+runs-1")
    p.add_argument("--runs", type=int, help="number of runs, overrides the config")
    p.set_defaults(func=cmd_batch)
    p = sub.add_parser("compare-ekf", parents=[common], help="paired runs with and without the EKF")
    p.add_argument("--runs", type=int, help="number of paired runs, overrides the config")
    p.set_defaults(func=cmd_compare_ekf)
    p = sub.add_parser("jactest", parents=[common], help="finite-difference Jacobian report")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_jactest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "runs", None) is not None and args.runs < 1:
        build_parser().error("--runs must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
