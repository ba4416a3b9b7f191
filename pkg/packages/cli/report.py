"""greenshop: aggregate results.csv into summary tables and plot-ready long-format series."""

from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd
from tabulate import tabulate

from .experiment import RESULT_COLUMNS

logger = logging.getLogger(__name__)

GROUP_COLUMNS = ["fleet_kind", "n_jobs", "k_tasks", "n_machines", "trace_label", "objective", "stretch"]
NUMERIC_COLUMNS = [
    "n_jobs", "k_tasks", "n_machines", "seed", "opt_makespan", "makespan_bound",
    "baseline_carbon_g", "baseline_energy_kwh", "baseline_utilization",
    "constrained_carbon_g", "constrained_energy_kwh", "constrained_makespan",
    "constrained_utilization", "carbon_savings_pct", "energy_savings_pct",
]
SERIES_AXES = {"stretch": "stretch", "trace": "trace_label", "n_machines": "n_machines", "k_tasks": "k_tasks"}
INT_COLUMNS = ["n_jobs", "k_tasks", "n_machines", "seed", "opt_makespan", "makespan_bound", "constrained_makespan"]


def load_results(path: str | Path) -> tuple[pd.DataFrame, int]:
    """Completed rows of a results CSV and the number of rows skipped as malformed or failed."""
    bad_lines: list[list[str]] = []

    def on_bad_line(line: list[str]) -> None:
        bad_lines.append(line)
        return None

    frame = pd.read_csv(
        path, dtype=str, keep_default_na=False, engine="python", on_bad_lines=on_bad_line,
    )
    for line in bad_lines:
        logger.warning("skipping malformed row with %d fields: %s", len(line), ",".join(line)[:80])
    skipped = len(bad_lines)

    missing = [c for c in RESULT_COLUMNS if c not in frame.columns]
    if missing:
        logger.warning("results file %s lacks columns %s; nothing to aggregate", path, missing)
        return pd.DataFrame(columns=RESULT_COLUMNS), skipped + len(frame)

    failed = frame["error"] != ""
    for cell in frame.loc[failed, "cell_id"]:
        logger.warning("skipping failed cell %s", cell)

    numbers = frame[NUMERIC_COLUMNS].apply(pd.to_numeric, errors="coerce")
    broken = numbers.isna().any(axis=1) & ~failed
    for cell in frame.loc[broken, "cell_id"]:
        logger.warning("skipping row %s with non-numeric values", cell)

    keep = ~(failed | broken)
    skipped += int((~keep).sum())
    clean = frame.loc[keep].copy()
    clean[NUMERIC_COLUMNS] = numbers.loc[keep]
    clean[INT_COLUMNS] = clean[INT_COLUMNS].astype(int)
    clean["stretch_value"] = clean["stretch"].map(_stretch_value)
    clean["constrained_proven_optimal"] = clean["constrained_proven_optimal"] == "True"
    return clean.reset_index(drop=True), skipped


def _stretch_value(text: str) -> float:
    num, _, den = text.partition("/")
    return float(num) / float(den or 1)


def aggregate(frame: pd.DataFrame) -> pd.DataFrame:
    """One row per grid cell with mean savings, makespans and utilization over its instances."""
    if frame.empty:
        return pd.DataFrame(columns=GROUP_COLUMNS + ["instances"])
    table = (
        frame.groupby(GROUP_COLUMNS, sort=False)
        .agg(
            instances=("seed", "count"),
            mean_carbon_savings_pct=("carbon_savings_pct", "mean"),
            mean_energy_savings_pct=("energy_savings_pct", "mean"),
            mean_opt_makespan=("opt_makespan", "mean"),
            mean_constrained_makespan=("constrained_makespan", "mean"),
            mean_baseline_utilization=("baseline_utilization", "mean"),
            mean_constrained_utilization=("constrained_utilization", "mean"),
            proven_optimal_share=("constrained_proven_optimal", "mean"),
            stretch_value=("stretch_value", "first"),
        )
        .reset_index()
        .sort_values(["fleet_kind", "n_jobs", "k_tasks", "n_machines", "trace_label", "objective", "stretch_value"])
        .drop(columns="stretch_value")
        .reset_index(drop=True)
    )
    return table


def series(frame: pd.DataFrame, axis: str, objective: str) -> pd.DataFrame:
    """Long format: one (x, metric, value) row per instance for a single objective."""
    column = SERIES_AXES[axis]
    rows = frame[frame["objective"] == objective]
    long = rows.melt(
        id_vars=[column, "fleet_kind", "seed"],
        value_vars=["carbon_savings_pct", "energy_savings_pct"],
        var_name="metric",
        value_name="value",
    )
    long = long.rename(columns={column: axis})
    long.insert(1, "objective", objective)
    return long.sort_values([axis, "fleet_kind", "metric", "seed"], key=_axis_sort_key).reset_index(drop=True)


def _axis_sort_key(col: pd.Series) -> pd.Series:
    if col.name == "stretch":
        return col.map(_stretch_value)
    return col


def makespan_distribution(frame: pd.DataFrame) -> pd.DataFrame:
    """Optimal makespan of every distinct instance, per fleet kind."""
    instances = frame.drop_duplicates(["fleet_kind", "n_jobs", "k_tasks", "n_machines", "seed"])
    return (
        instances[["fleet_kind", "n_jobs", "k_tasks", "n_machines", "seed", "opt_makespan"]]
        .sort_values(["fleet_kind", "n_jobs", "k_tasks", "n_machines", "seed"])
        .reset_index(drop=True)
    )


def energy_tradeoff(frame: pd.DataFrame) -> pd.DataFrame:
    """Pair carbon-optimal and energy-optimal schedules of the same cell; overhead in percent."""
    keys = ["fleet_kind", "n_jobs", "k_tasks", "n_machines", "trace_label", "stretch", "seed"]
    picked = ["constrained_energy_kwh", "constrained_carbon_g"]
    carbon = frame[frame["objective"] == "carbon"][keys + picked]
    energy = frame[frame["objective"] == "energy"][keys + picked]
    paired = carbon.merge(energy, on=keys, suffixes=("_carbon_opt", "_energy_opt"))
    if paired.empty:
        return pd.DataFrame(columns=keys + ["energy_overhead_pct", "carbon_reduction_pct"])
    paired["energy_overhead_pct"] = 100 * (
        paired["constrained_energy_kwh_carbon_opt"] / paired["constrained_energy_kwh_energy_opt"] - 1
    )
    paired["carbon_reduction_pct"] = 100 * (
        1 - paired["constrained_carbon_g_carbon_opt"] / paired["constrained_carbon_g_energy_opt"].where(
            paired["constrained_carbon_g_energy_opt"] != 0
        )
    )
    return paired.sort_values(keys).reset_index(drop=True)


def render_table(table: pd.DataFrame, skipped: int = 0) -> str:
    text = tabulate(table, headers="keys", tablefmt="github", showindex=False, floatfmt=".2f")
    return f"{text}\n\nskipped rows: {skipped}\n"


def write_report(results_csv: str | Path, out_dir: str | Path) -> tuple[list[Path], int]:
    """Write every aggregate and series file; returns the paths written and the skipped-row count."""
    frame, skipped = load_results(results_csv)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, data: pd.DataFrame) -> None:
        path = out / name
        data.to_csv(path, index=False)
        written.append(path)

    table = aggregate(frame)
    emit("table.csv", table)
    text_path = out / "table.txt"
    text_path.write_text(render_table(table, skipped))
    written.append(text_path)

    for objective in sorted(frame["objective"].unique()):
        for axis in SERIES_AXES:
            emit(f"series_{axis}_{objective}.csv", series(frame, axis, objective))
    dist = makespan_distribution(frame)
    for fleet in sorted(dist["fleet_kind"].unique()):
        emit(f"opt_makespan_{fleet}.csv", dist[dist["fleet_kind"] == fleet].reset_index(drop=True))
    emit("energy_tradeoff.csv", energy_tradeoff(frame))

    logger.info("report: %d files from %d rows (%d skipped)", len(written), len(frame), skipped)
    return written, skipped
