"""Experiment orchestration CLI.

Subcommands: simulate (one configuration), sweep (k_min x epsilon grid),
sensitivity (one-axis-at-a-time deltas vs the baseline), report (re-summarize
a trajectory dump). All outputs are byte-deterministic for a given input and
seed: reruns produce identical files.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import (
    ExperimentSpec,
    SimulationConfig,
    load_experiment_spec,
    load_simulation_config,
)
from .engine import (
    LossTrajectory,
    RiskReport,
    p_var,
    risk_report,
    run_simulation,
    simulate_utility,
    terminal_losses,
)
from .errors import ConfigError

WORKERS_ENV = "PRIVRISK_WORKERS"

SWEEP_COLUMNS = [
    "k_min",
    "epsilon",
    "pvar95",
    "pvar99",
    "cpvar95",
    "max",
    "spearman",
    "mae_pp",
    "user_error_rate",
]
SENSITIVITY_COLUMNS = ["axis", "value", "pvar95", "delta_pct"]
TRAJECTORY_COLUMNS = ["run", "t", "loss", "cohort_size", "flag"]


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _fmt(x: float) -> str:
    """Shortest round-trip decimal form, '.' decimal point."""
    return repr(float(x))


def write_report_json(path: Path, report: RiskReport) -> None:
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")


def write_trajectories_csv(path: Path, trajectories: list[LossTrajectory]) -> None:
    with path.open("w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for traj in trajectories:
            for t in range(traj.losses.size):
                writer.writerow(
                    [
                        traj.run,
                        t + 1,
                        _fmt(traj.losses[t]),
                        int(traj.cohort_sizes[t]),
                        int(traj.day_flags[t]),
                    ]
                )


def read_trajectories_csv(path: Path) -> list[LossTrajectory]:
    runs: dict[int, list[tuple[float, int, int]]] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRAJECTORY_COLUMNS:
            raise ConfigError(f"unexpected trajectory columns: {reader.fieldnames}")
        for row in reader:
            runs.setdefault(int(row["run"]), []).append(
                (float(row["loss"]), int(row["cohort_size"]), int(row["flag"]))
            )
    out = []
    for run in sorted(runs):
        rows = runs[run]
        out.append(
            LossTrajectory(
                run=run,
                losses=np.array([r[0] for r in rows], dtype=np.float64),
                cohort_sizes=np.array([r[1] for r in rows], dtype=np.int64),
                day_flags=np.array([r[2] for r in rows], dtype=np.uint8),
            )
        )
    return out


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Privacy-risk simulation experiments."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Simulation config JSON.")
@click.option("--seed", type=int, default=None, help="RNG seed; overrides the config's seed.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--workers", type=int, default=None, help=f"Worker processes (default ${WORKERS_ENV} or 1).")
def simulate(config_path: str, seed: int | None, out_dir: str, workers: int | None) -> None:
    """Run one configuration; write report.json and trajectories.csv."""
    try:
        config = load_simulation_config(config_path).resolved(seed)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    trajectories = run_simulation(config, workers=workers or _default_workers())
    report = risk_report(trajectories, config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(out / "report.json", report)
    write_trajectories_csv(out / "trajectories.csv", trajectories)
    click.echo(f"p_var_95={_fmt(report.p_var_95)} cp_var_95={_fmt(report.cp_var_95)}")
    click.echo(f"wrote {out / 'report.json'} and {out / 'trajectories.csv'}")


def _sweep_rows(spec: ExperimentSpec, workers: int) -> list[dict[str, object]]:
    rows = []
    # Table ordering: k_min ascending, epsilon descending.
    for k_min in sorted(spec.sweep_k_min):
        for eps in sorted(spec.sweep_epsilon, reverse=True):
            config = replace(
                spec.base, k_min=k_min, k_max=None, epsilon=eps
            ).resolved(spec.seed)
            trajectories = run_simulation(config, workers=workers)
            report = risk_report(trajectories, config)
            utility = simulate_utility(config, cohort_size=max(k_min, 2), seed=spec.seed)
            rows.append(
                {
                    "k_min": k_min,
                    "epsilon": eps,
                    "pvar95": report.p_var_95,
                    "pvar99": report.p_var_99,
                    "cpvar95": report.cp_var_95,
                    "max": report.max_loss,
                    "spearman": utility.spearman_rho,
                    "mae_pp": utility.percentile_mae,
                    "user_error_rate": utility.user_error_rate,
                }
            )
    return rows


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="Experiment spec JSON.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--workers", type=int, default=None)
def sweep(spec_path: str, out_dir: str, workers: int | None) -> None:
    """Grid over (k_min, epsilon); one CSV row per cell with risk and utility."""
    try:
        spec = load_experiment_spec(spec_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    rows = _sweep_rows(spec, workers or _default_workers())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with path.open("w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [row["k_min"]]
                + [_fmt(row[c]) for c in SWEEP_COLUMNS[1:]]
            )
    _write_meta(out / "sweep_meta.json", spec)
    click.echo(f"wrote {path} ({len(rows)} rows)")


def _sensitivity_rows(spec: ExperimentSpec, workers: int) -> list[dict[str, object]]:
    base = spec.base.resolved(spec.seed)

    def pvar_for(config: SimulationConfig) -> float:
        trajectories = run_simulation(config, workers=workers)
        return p_var(terminal_losses(trajectories), 0.95)

    baseline_pvar = pvar_for(base)
    axes: list[tuple[str, tuple, object]] = [
        ("known_fraction", spec.sens_known_fraction, base.known_fraction),
        ("p_churn", spec.sens_p_churn, base.p_churn),
        ("query_correlation", spec.sens_query_correlation, base.query_correlation),
        ("horizon_days", spec.sens_horizon_days, base.horizon_days),
    ]
    rows = [
        {
            "axis": "baseline",
            "value": base.epsilon,
            "pvar95": baseline_pvar,
            "delta_pct": 0.0,
        }
    ]
    for axis, values, base_value in axes:
        for value in values:
            if value == base_value:
                pvar_value = baseline_pvar
            else:
                cfg = replace(base, **{axis: value}).resolved(spec.seed)
                pvar_value = pvar_for(cfg)
            delta = (
                100.0 * (pvar_value - baseline_pvar) / baseline_pvar
                if baseline_pvar != 0
                else 0.0
            )
            rows.append(
                {"axis": axis, "value": value, "pvar95": pvar_value, "delta_pct": delta}
            )
    return rows


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="Experiment spec JSON.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--workers", type=int, default=None)
def sensitivity(spec_path: str, out_dir: str, workers: int | None) -> None:
    """One-axis-at-a-time P-VaR deltas against the baseline configuration."""
    try:
        spec = load_experiment_spec(spec_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    rows = _sensitivity_rows(spec, workers or _default_workers())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sensitivity.csv"
    with path.open("w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SENSITIVITY_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["axis"],
                    _fmt(row["value"]) if isinstance(row["value"], float) else row["value"],
                    _fmt(row["pvar95"]),
                    _fmt(row["delta_pct"]),
                ]
            )
    _write_meta(out / "sensitivity_meta.json", spec)
    click.echo(f"wrote {path} ({len(rows)} rows)")


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True), help="Directory with trajectories.csv.")
def report(in_dir: str) -> None:
    """Re-summarize a trajectory dump into a risk report on stdout."""
    path = Path(in_dir) / "trajectories.csv"
    if not path.exists():
        raise click.ClickException(f"no trajectories.csv in {in_dir}")
    trajectories = read_trajectories_csv(path)
    summary = risk_report(trajectories)
    click.echo(json.dumps(summary.to_dict(), sort_keys=True, indent=2))


def _write_meta(path: Path, spec: ExperimentSpec) -> None:
    meta = {
        "base_config": spec.base.resolved(spec.seed).to_dict(),
        "seed": spec.seed,
        "sweep": {"k_min": list(spec.sweep_k_min), "epsilon": list(spec.sweep_epsilon)},
        "sensitivity": {
            "known_fraction": list(spec.sens_known_fraction),
            "p_churn": list(spec.sens_p_churn),
            "query_correlation": list(spec.sens_query_correlation),
            "horizon_days": list(spec.sens_horizon_days),
        },
        "version": __version__,
    }
    path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


if __name__ == "__main__":
    sys.exit(main())
