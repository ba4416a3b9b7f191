"""greenshop: experiment grid, per-cell bi-level runs and the results CSV writer."""

from __future__ import annotations

import csv
import itertools
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np

from packages.core.codec import instance_to_dict, result_to_dict, write_json
from packages.core.config import get_workers
from packages.core.errors import ConfigError, ParameterError, TraceExhaustedError
from packages.core.generator import FleetKind, GeneratorConfig, generate
from packages.core.models import Instance, as_fraction
from packages.core.objectives import evaluate
from packages.core.solver import (
    ObjectiveKind,
    SolveConfig,
    SolveResult,
    solve,
    solve_stretched,
    stretched_bound,
)
from packages.core.traces import EPOCHS_PER_HOUR, CarbonTrace, load_hourly_csv, synthetic_sinusoid

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.csv"


@lru_cache(maxsize=16)
def _hourly_trace(path: str) -> CarbonTrace:
    return load_hourly_csv(path, 0, label=Path(path).stem)


@dataclass(frozen=True)
class TraceSource:
    """A labelled carbon signal: an hourly CSV (fixed or per-instance random offset) or a sinusoid."""

    label: str
    csv: str | None = None
    offset: int | str = 0
    synthetic: tuple[tuple[str, Any], ...] | None = None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: Path | None = None) -> TraceSource:
        """Relative `csv` paths resolve against `base_dir` (the config file's folder) when given."""
        label = data.get("label")
        if not label:
            raise ConfigError(f"trace source needs a label: {dict(data)}")
        if bool(data.get("csv")) == bool(data.get("synthetic")):
            raise ConfigError(f"trace '{label}' must set exactly one of csv or synthetic")
        offset = data.get("offset", 0)
        if offset != "random" and (not isinstance(offset, int) or offset < 0):
            raise ConfigError(f"trace '{label}': offset must be a non-negative integer or 'random'")
        synthetic = None
        if data.get("synthetic"):
            params = dict(data["synthetic"])
            missing = {"mean", "amplitude", "period"} - set(params)
            if missing:
                raise ConfigError(f"trace '{label}': synthetic parameters {sorted(missing)} missing")
            params.setdefault("phase", 0)
            synthetic = tuple(sorted(params.items()))
        path = data.get("csv")
        if path and base_dir is not None and not Path(path).is_absolute():
            path = str(Path(base_dir) / path)
        return cls(str(label), path, offset, synthetic)

    def to_mapping(self) -> dict[str, Any]:
        if self.synthetic is not None:
            return {"label": self.label, "synthetic": dict(self.synthetic)}
        return {"label": self.label, "csv": self.csv, "offset": self.offset}

    def load(self, length: int, seed: int) -> tuple[CarbonTrace, int]:
        """Trace of at least `length` epochs for the instance with `seed`, and the row offset used."""
        if self.synthetic is not None:
            p = dict(self.synthetic)
            trace = synthetic_sinusoid(
                as_fraction(p["mean"]), as_fraction(p["amplitude"]),
                int(p["period"]), int(p["phase"]), length, label=self.label,
            )
            return trace, 0

        base = _hourly_trace(self.csv)
        rows = len(base) // EPOCHS_PER_HOUR
        hours = -(-length // EPOCHS_PER_HOUR)
        if hours > rows:
            raise TraceExhaustedError(length, len(base))
        if self.offset == "random":
            rng = np.random.default_rng([seed, zlib.crc32(self.label.encode())])
            offset = int(rng.integers(rows - hours + 1))
        else:
            offset = int(self.offset)
            if offset >= rows:
                raise ParameterError(f"trace '{self.label}': offset {offset} beyond {rows} rows")
        trace = CarbonTrace(base.intensities[offset * EPOCHS_PER_HOUR:], f"{self.label}@{offset}")
        trace.require(length)
        return trace, offset


def _seeds(raw: Any) -> list[int]:
    if isinstance(raw, Mapping):
        return list(range(int(raw.get("start", 0)), int(raw.get("start", 0)) + int(raw["count"])))
    if isinstance(raw, int):
        return [raw]
    return [int(s) for s in raw]


def _as_list(raw: Any) -> list:
    return list(raw) if isinstance(raw, (list, tuple)) else [raw]


@dataclass
class ExperimentSpec:
    n_jobs: list[int] = field(default_factory=lambda: [6])
    k_tasks: list[int] = field(default_factory=lambda: [3])
    n_machines: list[int] = field(default_factory=lambda: [3])
    fleet_kind: list[FleetKind] = field(default_factory=lambda: [FleetKind.HOMOGENEOUS])
    seeds: list[int] = field(default_factory=lambda: list(range(50)))
    duration_mean_epochs: Fraction = Fraction(7)
    arrival_window_epochs: int = 96
    traces: list[TraceSource] = field(default_factory=list)
    stretches: list[Fraction] = field(default_factory=lambda: [Fraction(1), Fraction(3, 2), Fraction(2)])
    objectives: list[ObjectiveKind] = field(default_factory=lambda: [ObjectiveKind.CARBON])
    time_limit: float | None = None
    node_limit: int | None = None
    stretch_time_limits: dict[Fraction, float] = field(default_factory=dict)
    output_dir: Path = Path("results")
    workers: int | None = None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment fields {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        try:
            for name in ("n_jobs", "k_tasks", "n_machines"):
                if name in data:
                    kwargs[name] = [int(v) for v in _as_list(data[name])]
            if "fleet_kind" in data:
                kwargs["fleet_kind"] = [FleetKind(v) for v in _as_list(data["fleet_kind"])]
            if "objectives" in data:
                kwargs["objectives"] = [ObjectiveKind(v) for v in _as_list(data["objectives"])]
            if "stretches" in data:
                kwargs["stretches"] = [as_fraction(str(v)) for v in _as_list(data["stretches"])]
            if "stretch_time_limits" in data:
                kwargs["stretch_time_limits"] = {
                    as_fraction(str(k)): float(v) for k, v in dict(data["stretch_time_limits"]).items()
                }
            if "duration_mean_epochs" in data:
                kwargs["duration_mean_epochs"] = as_fraction(str(data["duration_mean_epochs"]))
            if "seeds" in data:
                kwargs["seeds"] = _seeds(data["seeds"])
            for name in ("arrival_window_epochs", "node_limit", "workers"):
                if data.get(name) is not None:
                    kwargs[name] = int(data[name])
            if data.get("time_limit") is not None:
                kwargs["time_limit"] = float(data["time_limit"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid experiment value: {e}") from e
        if "traces" in data:
            kwargs["traces"] = [TraceSource.from_mapping(t, base_dir) for t in _as_list(data["traces"])]
        if data.get("output_dir"):
            kwargs["output_dir"] = Path(data["output_dir"])
        spec = cls(**kwargs)
        spec.validate()
        return spec

    def to_mapping(self) -> dict[str, Any]:
        d = asdict(self)
        d["fleet_kind"] = [k.value for k in self.fleet_kind]
        d["objectives"] = [o.value for o in self.objectives]
        d["stretches"] = [str(s) for s in self.stretches]
        d["stretch_time_limits"] = {str(k): v for k, v in self.stretch_time_limits.items()}
        d["duration_mean_epochs"] = str(self.duration_mean_epochs)
        d["traces"] = [t.to_mapping() for t in self.traces]
        d["output_dir"] = str(self.output_dir)
        return d

    def validate(self) -> None:
        for name in ("n_jobs", "k_tasks", "n_machines", "fleet_kind", "seeds", "traces", "stretches", "objectives"):
            if not getattr(self, name):
                raise ConfigError(f"experiment grid is empty: no {name}")
        if any(not o.uses_carbon for o in self.objectives):
            raise ConfigError("experiment objectives must be carbon and/or energy")
        if any(s < 1 for s in self.stretches):
            raise ConfigError("stretch factors must be >= 1")
        labels = [t.label for t in self.traces]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate trace labels {labels}")
        for config in self.generator_configs():
            config.validate()

    def generator_configs(self) -> Iterator[GeneratorConfig]:
        for n, k, m, fleet, seed in itertools.product(
            self.n_jobs, self.k_tasks, self.n_machines, self.fleet_kind, self.seeds
        ):
            yield GeneratorConfig(
                n_jobs=n, k_tasks=k, n_machines=m, fleet_kind=fleet,
                duration_mean_epochs=self.duration_mean_epochs,
                arrival_window_epochs=self.arrival_window_epochs, seed=seed,
            )

    def groups(self) -> list[CellGroup]:
        """One unit of work per (instance, trace) pair, in deterministic order."""
        out = []
        for config, trace in itertools.product(list(self.generator_configs()), self.traces):
            out.append(CellGroup(
                index=len(out), generator=config, trace=trace,
                stretches=tuple(self.stretches), objectives=tuple(self.objectives),
                time_limit=self.time_limit, node_limit=self.node_limit,
                stretch_time_limits=tuple(sorted(self.stretch_time_limits.items())),
                output_dir=str(self.output_dir),
            ))
        return out


@dataclass(frozen=True)
class CellGroup:
    index: int
    generator: GeneratorConfig
    trace: TraceSource
    stretches: tuple[Fraction, ...]
    objectives: tuple[ObjectiveKind, ...]
    time_limit: float | None
    node_limit: int | None
    stretch_time_limits: tuple[tuple[Fraction, float], ...]
    output_dir: str

    @property
    def stem(self) -> str:
        g = self.generator
        return f"{g.fleet_kind.value}_n{g.n_jobs}_k{g.k_tasks}_m{g.n_machines}_seed{g.seed}"


@dataclass
class ResultRow:
    cell_id: str
    n_jobs: int
    k_tasks: int
    n_machines: int
    fleet_kind: str
    seed: int
    trace_label: str
    trace_offset: int | str
    objective: str
    stretch: str
    opt_makespan: int | str = ""
    makespan_bound: int | str = ""
    baseline_carbon_g: str = ""
    baseline_energy_kwh: str = ""
    baseline_utilization: str = ""
    constrained_carbon_g: str = ""
    constrained_energy_kwh: str = ""
    constrained_makespan: int | str = ""
    constrained_utilization: str = ""
    carbon_savings_pct: str = ""
    energy_savings_pct: str = ""
    baseline_proven_optimal: str = ""
    constrained_proven_optimal: str = ""
    baseline_nodes: int | str = ""
    constrained_nodes: int | str = ""
    baseline_wall_s: str = ""
    constrained_wall_s: str = ""
    instance_file: str = ""
    schedule_file: str = ""
    error: str = ""


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


def _num(value: Fraction | float) -> str:
    return repr(float(value))


def _error_tag(e: Exception) -> str:
    return f"{type(e).__name__}: {e}"


def run_group(group: CellGroup) -> list[ResultRow]:
    """Stage one once, then stage two for every objective and stretch of the group."""
    g = group.generator
    out = Path(group.output_dir)
    limits = dict(group.stretch_time_limits)

    def blank(objective: ObjectiveKind, stretch: Fraction, offset: int | str) -> ResultRow:
        return ResultRow(
            cell_id=f"{group.stem}_{group.trace.label}_{objective.value}_S{stretch}",
            n_jobs=g.n_jobs, k_tasks=g.k_tasks, n_machines=g.n_machines,
            fleet_kind=g.fleet_kind.value, seed=g.seed, trace_label=group.trace.label,
            trace_offset=offset, objective=objective.value, stretch=str(stretch),
        )

    cells = list(itertools.product(group.objectives, group.stretches))
    try:
        instance = generate(g)
        instance_file = write_json(out / "instances" / f"{group.stem}.json", instance_to_dict(instance))
        baseline = solve(
            instance, None,
            SolveConfig(ObjectiveKind.MAKESPAN, time_limit=group.time_limit, node_limit=group.node_limit),
        )
        opt = baseline.report.makespan
        needed = min(instance.horizon, stretched_bound(max(group.stretches), opt))
        trace, offset = group.trace.load(needed, g.seed)
    except Exception as e:  # any failure is recorded on the rows; the batch goes on
        logger.warning("cell group %s/%s failed: %s", group.stem, group.trace.label, e)
        rows = []
        for objective, stretch in cells:
            row = blank(objective, stretch, group.trace.offset)
            row.error = _error_tag(e)
            rows.append(row)
        return rows

    rows = []
    for objective, stretch in cells:
        row = blank(objective, stretch, offset)
        row.instance_file = str(instance_file)
        try:
            _fill_row(row, instance, trace, baseline, objective, stretch, group, out, limits)
        except Exception as e:  # recorded on this row only
            logger.warning("cell %s failed: %s", row.cell_id, e)
            row = blank(objective, stretch, offset)
            row.instance_file = str(instance_file)
            row.error = _error_tag(e)
        rows.append(row)
    return rows


def _fill_row(
    row: ResultRow,
    instance: Instance,
    trace: CarbonTrace,
    baseline: SolveResult,
    objective: ObjectiveKind,
    stretch: Fraction,
    group: CellGroup,
    out: Path,
    limits: dict[Fraction, float],
) -> None:
    result = solve_stretched(
        instance, trace, baseline, objective, stretch,
        time_limit=limits.get(stretch, group.time_limit), node_limit=group.node_limit,
    )
    schedule_file = write_json(
        out / "schedules" / f"{row.cell_id}.json", result_to_dict(result, instance, objective)
    )
    base, con = result.baseline, result.constrained
    base_carbon = evaluate(instance, base.schedule, trace).carbon_g
    con_carbon = con.report.carbon_g
    row.opt_makespan = result.opt_makespan
    row.makespan_bound = result.makespan_bound
    row.baseline_carbon_g = _num(base_carbon)
    row.baseline_energy_kwh = _num(base.report.energy_kwh)
    row.baseline_utilization = _num(base.report.utilization)
    row.constrained_carbon_g = _num(con_carbon)
    row.constrained_energy_kwh = _num(con.report.energy_kwh)
    row.constrained_makespan = con.report.makespan
    row.constrained_utilization = _num(con.report.utilization)
    row.carbon_savings_pct = _num(result.carbon_savings_pct)
    row.energy_savings_pct = _num(result.energy_savings_pct)
    row.baseline_proven_optimal = str(base.proven_optimal)
    row.constrained_proven_optimal = str(con.proven_optimal)
    row.baseline_nodes = base.nodes_explored
    row.constrained_nodes = con.nodes_explored
    row.baseline_wall_s = f"{base.wall_time:.6f}"
    row.constrained_wall_s = f"{con.wall_time:.6f}"
    row.schedule_file = str(schedule_file)


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> Path:
    """Run every cell group and write results.csv; rows are written by this process only."""
    spec.validate()
    workers = workers or spec.workers or get_workers()
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups = spec.groups()
    results_path = out / RESULTS_FILE
    logger.info("experiment: %d cell groups, %d workers", len(groups), workers)

    with open(results_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        if workers == 1:
            batches = map(run_group, groups)
            for rows in batches:
                writer.writerows(asdict(r) for r in rows)
                f.flush()
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for rows in pool.map(run_group, groups):
                    writer.writerows(asdict(r) for r in rows)
                    f.flush()
    return results_path
