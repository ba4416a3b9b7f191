"""Versioned JSON documents: instance.v1, schedule.v1, trace.v1, result.v1."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from .errors import CodecError
from .models import Assignment, Instance, Job, Machine, Schedule, Task, as_fraction
from .objectives import ObjectiveReport
from .solver import BilevelResult, ObjectiveKind, SolveResult
from .traces import CarbonTrace

INSTANCE_SCHEMA = "instance.v1"
SCHEDULE_SCHEMA = "schedule.v1"
TRACE_SCHEMA = "trace.v1"
RESULT_SCHEMA = "result.v1"


def format_rational(value: Fraction | int) -> str:
    """Exact text form: a plain decimal when it terminates, otherwise "p/q"."""
    value = Fraction(value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    if digits == 0:
        return str(value.numerator)
    scaled = abs(value.numerator) * (10**digits // value.denominator)
    whole, frac = divmod(scaled, 10**digits)
    sign = "-" if value < 0 else ""
    return f"{sign}{whole}.{str(frac).rjust(digits, '0').rstrip('0')}"


def parse_rational(value: Any) -> Fraction:
    try:
        if isinstance(value, float):
            return Fraction(repr(value))
        return as_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise CodecError(f"not a rational number: {value!r}") from e


def _expect(doc: Any, schema: str) -> dict:
    if not isinstance(doc, dict):
        raise CodecError(f"expected a {schema} object, got {type(doc).__name__}")
    if doc.get("schema") != schema:
        raise CodecError(f"expected schema {schema!r}, got {doc.get('schema')!r}")
    return doc


# ── instance ─────────────────────────────────────────────────────────────

def instance_to_dict(instance: Instance) -> dict:
    return {
        "schema": INSTANCE_SCHEMA,
        "name": instance.name,
        "horizon": instance.horizon,
        "machines": [
            {"id": m.id, "power_kw": format_rational(m.power_kw), "speed": format_rational(m.speed)}
            for m in instance.machines
        ],
        "jobs": [
            {
                "id": job.id,
                "arrival": job.arrival,
                "tasks": [
                    {
                        "task_index": t.task_index,
                        "base_duration": t.base_duration,
                        "eligible_machines": sorted(t.eligible_machines),
                    }
                    for t in job.tasks
                ],
                "edges": [list(e) for e in sorted(job.edges)],
            }
            for job in instance.jobs
        ],
    }


def instance_from_dict(doc: Any) -> Instance:
    doc = _expect(doc, INSTANCE_SCHEMA)
    try:
        machines = tuple(
            Machine(int(m["id"]), parse_rational(m["power_kw"]), parse_rational(m["speed"]))
            for m in doc["machines"]
        )
        jobs = []
        for j in doc["jobs"]:
            tasks = tuple(
                Task(int(j["id"]), int(t["task_index"]), int(t["base_duration"]),
                     frozenset(int(x) for x in t["eligible_machines"]))
                for t in j["tasks"]
            )
            edges = frozenset((int(u), int(v)) for u, v in j.get("edges", []))
            jobs.append(Job(int(j["id"]), int(j["arrival"]), tasks, edges))
        horizon = doc.get("horizon")
        return Instance(tuple(jobs), machines, int(horizon) if horizon is not None else None, doc.get("name", ""))
    except (KeyError, TypeError, ValueError) as e:
        raise CodecError(f"malformed {INSTANCE_SCHEMA} document: {e!r}") from e


# ── schedule ─────────────────────────────────────────────────────────────

def schedule_to_dict(schedule: Schedule, instance: Instance | None = None) -> dict:
    rows = []
    for (job_id, task_index), a in sorted(schedule.assignments.items()):
        row = {"job_id": job_id, "task_index": task_index, "machine_id": a.machine_id, "start": a.start}
        if instance is not None:
            row["end"] = a.start + instance.processing_time((job_id, task_index), a.machine_id)
        elif a.end is not None:
            row["end"] = a.end
        rows.append(row)
    return {"schema": SCHEDULE_SCHEMA, "assignments": rows}


def schedule_from_dict(doc: Any) -> Schedule:
    doc = _expect(doc, SCHEDULE_SCHEMA)
    try:
        assignments = {}
        for row in doc["assignments"]:
            key = (int(row["job_id"]), int(row["task_index"]))
            if key in assignments:
                raise CodecError(f"task {key} is assigned twice")
            end = row.get("end")
            assignments[key] = Assignment(int(row["machine_id"]), int(row["start"]), int(end) if end is not None else None)
        return Schedule(assignments)
    except (KeyError, TypeError, ValueError) as e:
        raise CodecError(f"malformed {SCHEDULE_SCHEMA} document: {e!r}") from e


# ── trace ────────────────────────────────────────────────────────────────

def trace_to_dict(trace: CarbonTrace) -> dict:
    return {
        "schema": TRACE_SCHEMA,
        "label": trace.origin_label,
        "intensities": [format_rational(v) for v in trace.intensities],
    }


def trace_from_dict(doc: Any) -> CarbonTrace:
    doc = _expect(doc, TRACE_SCHEMA)
    try:
        return CarbonTrace(tuple(parse_rational(v) for v in doc["intensities"]), doc.get("label", ""))
    except (KeyError, TypeError) as e:
        raise CodecError(f"malformed {TRACE_SCHEMA} document: {e!r}") from e


# ── results ──────────────────────────────────────────────────────────────

def report_to_dict(report: ObjectiveReport) -> dict:
    return {
        "makespan": report.makespan,
        "energy_kwh": format_rational(report.energy_kwh),
        "carbon_g": format_rational(report.carbon_g) if report.carbon_g is not None else None,
        "utilization": format_rational(report.utilization),
    }


def solve_result_to_dict(result: SolveResult, instance: Instance, objective: ObjectiveKind) -> dict:
    return {
        "objective": ObjectiveKind(objective).value,
        "objective_value": [v if isinstance(v, int) else format_rational(v) for v in result.objective_value],
        "report": report_to_dict(result.report),
        "proven_optimal": result.proven_optimal,
        "nodes_explored": result.nodes_explored,
        "wall_time": round(result.wall_time, 6),
        "deterministic": result.deterministic,
        "limit_hit": result.limit_hit,
        "schedule": schedule_to_dict(result.schedule, instance),
    }


def result_to_dict(result: SolveResult | BilevelResult, instance: Instance, objective: ObjectiveKind | None = None) -> dict:
    """result.v1: a makespan-only baseline, or a full bi-level result."""
    doc: dict[str, Any] = {"schema": RESULT_SCHEMA, "instance": instance.name}
    if isinstance(result, SolveResult):
        doc["mode"] = "makespan"
        doc["opt_makespan"] = result.report.makespan
        doc["baseline"] = solve_result_to_dict(result, instance, ObjectiveKind.MAKESPAN)
        return doc
    doc.update({
        "mode": "bilevel",
        "opt_makespan": result.opt_makespan,
        "stretch": format_rational(result.stretch),
        "makespan_bound": result.makespan_bound,
        "carbon_savings_pct": format_rational(result.carbon_savings_pct),
        "energy_savings_pct": format_rational(result.energy_savings_pct),
        "baseline": solve_result_to_dict(result.baseline, instance, ObjectiveKind.MAKESPAN),
        "constrained": solve_result_to_dict(result.constrained, instance, objective or ObjectiveKind.CARBON),
    })
    return doc


def schedule_from_any(doc: Any) -> Schedule:
    """A schedule.v1 document, or the final-stage schedule of a result.v1 document."""
    if isinstance(doc, dict) and doc.get("schema") == RESULT_SCHEMA:
        stage = doc.get("constrained") or doc.get("baseline")
        if not isinstance(stage, dict) or "schedule" not in stage:
            raise CodecError("result.v1 document carries no schedule")
        return schedule_from_dict(stage["schedule"])
    return schedule_from_dict(doc)


# ── files ────────────────────────────────────────────────────────────────

def write_json(path: str | Path, doc: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise CodecError(f"cannot read {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise CodecError(f"{path} is not UTF-8 text: {e}") from e
    except json.JSONDecodeError as e:
        raise CodecError(f"{path} is not valid JSON: {e}") from e
