"""greenshop: domain types for the flexible job shop, plus the schedule feasibility checker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple

import networkx as nx
import numpy as np

from .errors import (
    DagCycleError,
    EligibilityError,
    ParameterError,
    ScheduleReferenceError,
)

# One epoch is 15 minutes of wall time.
EPOCH_HOURS = Fraction(1, 4)

TaskKey = tuple[int, int]


def as_fraction(value: int | float | str | Fraction) -> Fraction:
    """Coerce ints, decimal strings, "p/q" strings and floats to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)


@dataclass(frozen=True)
class Machine:
    id: int
    power_kw: Fraction
    speed: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "power_kw", as_fraction(self.power_kw))
        object.__setattr__(self, "speed", as_fraction(self.speed))
        if self.power_kw <= 0:
            raise ParameterError(f"machine {self.id}: power_kw must be positive, got {self.power_kw}")
        if self.speed <= 0:
            raise ParameterError(f"machine {self.id}: speed must be positive, got {self.speed}")


@dataclass(frozen=True)
class Task:
    job_id: int
    task_index: int
    base_duration: int
    eligible_machines: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "eligible_machines", frozenset(self.eligible_machines))
        if self.base_duration < 1:
            raise ParameterError(f"task {self.key}: base_duration must be >= 1, got {self.base_duration}")
        if not self.eligible_machines:
            raise ParameterError(f"task {self.key}: eligible_machines is empty")

    @property
    def key(self) -> TaskKey:
        return (self.job_id, self.task_index)


@dataclass(frozen=True)
class Job:
    id: int
    arrival: int
    tasks: tuple[Task, ...]
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "edges", frozenset((int(u), int(v)) for u, v in self.edges))
        if self.arrival < 0:
            raise ParameterError(f"job {self.id}: arrival must be >= 0, got {self.arrival}")
        for i, task in enumerate(self.tasks):
            if task.job_id != self.id or task.task_index != i:
                raise ParameterError(f"job {self.id}: task at position {i} is labelled {task.key}")
        n = len(self.tasks)
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ParameterError(f"job {self.id}: edge ({u}, {v}) references a missing task")
        topological_order(self)

    @cached_property
    def predecessors(self) -> dict[int, tuple[int, ...]]:
        preds: dict[int, list[int]] = {i: [] for i in range(len(self.tasks))}
        for u, v in self.edges:
            preds[v].append(u)
        return {i: tuple(sorted(p)) for i, p in preds.items()}

    @cached_property
    def successors(self) -> dict[int, tuple[int, ...]]:
        succs: dict[int, list[int]] = {i: [] for i in range(len(self.tasks))}
        for u, v in self.edges:
            succs[u].append(v)
        return {i: tuple(sorted(s)) for i, s in succs.items()}


@dataclass(frozen=True)
class Instance:
    jobs: tuple[Job, ...]
    machines: tuple[Machine, ...]
    horizon: int | None = None
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "machines", tuple(self.machines))
        ids = [m.id for m in self.machines]
        if len(set(ids)) != len(ids):
            raise ParameterError(f"duplicate machine ids in {ids}")
        job_ids = [j.id for j in self.jobs]
        if len(set(job_ids)) != len(job_ids):
            raise ParameterError(f"duplicate job ids in {job_ids}")
        known = set(ids)
        for task in self.tasks():
            missing = task.eligible_machines - known
            if missing:
                raise ParameterError(f"task {task.key}: eligible machines {sorted(missing)} are not in the fleet")
        if self.horizon is None:
            object.__setattr__(self, "horizon", default_horizon(self.jobs, self.machines))
        elif self.horizon < 1:
            raise ParameterError(f"horizon must be >= 1, got {self.horizon}")

    def tasks(self) -> Iterator[Task]:
        for job in self.jobs:
            yield from job.tasks

    @cached_property
    def task_map(self) -> dict[TaskKey, Task]:
        return {t.key: t for t in self.tasks()}

    @cached_property
    def job_map(self) -> dict[int, Job]:
        return {j.id: j for j in self.jobs}

    @cached_property
    def machine_map(self) -> dict[int, Machine]:
        return {m.id: m for m in self.machines}

    @property
    def n_tasks(self) -> int:
        return sum(len(j.tasks) for j in self.jobs)

    def processing_time(self, key: TaskKey, machine_id: int) -> int:
        return processing_time(self.task_map[key], self.machine_map[machine_id])


class Assignment(NamedTuple):
    machine_id: int
    start: int
    # Declared completion, only present when a schedule file states one.
    end: int | None = None


@dataclass(frozen=True)
class Schedule:
    assignments: dict[TaskKey, Assignment] = field(default_factory=dict)

    def intervals(self, instance: Instance) -> dict[TaskKey, tuple[int, int, int]]:
        """(machine_id, start, completion) per task, completion derived from processing time."""
        out = {}
        for key, a in self.assignments.items():
            out[key] = (a.machine_id, a.start, a.start + instance.processing_time(key, a.machine_id))
        return out


class ConstraintFamily(str, Enum):
    ARRIVAL = "arrival"
    PRECEDENCE = "precedence"
    ASSIGNMENT = "assignment"
    COMPLETION = "completion"
    NO_OVERLAP = "no_overlap"
    HORIZON = "horizon"


@dataclass(frozen=True)
class Violation:
    family: ConstraintFamily
    tasks: tuple[TaskKey, ...]
    epochs: tuple[int, ...]
    message: str


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def families(self) -> set[ConstraintFamily]:
        return {v.family for v in self.violations}


def processing_time(task: Task, machine: Machine) -> int:
    """Epochs `task` occupies on `machine`: ceil(base_duration / speed), at least 1."""
    if machine.id not in task.eligible_machines:
        raise EligibilityError(task.key, machine.id)
    return max(1, math.ceil(Fraction(task.base_duration) / machine.speed))


def default_horizon(jobs: Iterable[Job], machines: Iterable[Machine]) -> int:
    """Latest arrival plus the serial length of every task on its slowest eligible machine."""
    jobs = tuple(jobs)
    by_id = {m.id: m for m in machines}
    if not jobs:
        return 1
    serial = sum(
        max(processing_time(t, by_id[m]) for m in t.eligible_machines)
        for job in jobs
        for t in job.tasks
    )
    return max(1, max(j.arrival for j in jobs) + serial)


def topological_order(job: Job) -> list[int]:
    """Task indices with predecessors first; ties broken by ascending index."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(job.tasks)))
    graph.add_edges_from(job.edges)
    try:
        return list(nx.lexicographical_topological_sort(graph))
    except nx.NetworkXUnfeasible:
        cycle = nx.find_cycle(graph)
        raise DagCycleError(job.id, (u for u, _ in cycle)) from None


def check_feasible(instance: Instance, schedule: Schedule) -> FeasibilityReport:
    """Check arrival, precedence, assignment, completion, no-overlap and horizon constraints.

    Unknown tasks or machines are a reference error rather than a violation.
    """
    for key, a in schedule.assignments.items():
        if key not in instance.task_map:
            raise ScheduleReferenceError(f"schedule assigns unknown task {key}")
        if a.machine_id not in instance.machine_map:
            raise ScheduleReferenceError(f"task {key} assigned to unknown machine {a.machine_id}")

    violations: list[Violation] = []
    placed: dict[TaskKey, tuple[int, int, int]] = {}

    for task in instance.tasks():
        key = task.key
        a = schedule.assignments.get(key)
        if a is None:
            violations.append(Violation(ConstraintFamily.ASSIGNMENT, (key,), (), f"task {key} is not assigned"))
            continue
        if a.machine_id not in task.eligible_machines:
            violations.append(Violation(
                ConstraintFamily.ASSIGNMENT, (key,), (a.start,),
                f"task {key} assigned to ineligible machine {a.machine_id}",
            ))
            continue
        end = a.start + processing_time(task, instance.machine_map[a.machine_id])
        placed[key] = (a.machine_id, a.start, end)
        if a.end is not None and a.end != end:
            violations.append(Violation(
                ConstraintFamily.COMPLETION, (key,), (a.start, a.end, end),
                f"task {key} declares completion {a.end}, processing time gives {end}",
            ))

    for job in instance.jobs:
        for task in job.tasks:
            iv = placed.get(task.key)
            if iv is not None and iv[1] < job.arrival:
                violations.append(Violation(
                    ConstraintFamily.ARRIVAL, (task.key,), (iv[1], job.arrival),
                    f"task {task.key} starts at {iv[1]} before job arrival {job.arrival}",
                ))
        for u, v in sorted(job.edges):
            pu, pv = placed.get((job.id, u)), placed.get((job.id, v))
            if pu is None or pv is None:
                continue
            if pv[1] < pu[2]:
                violations.append(Violation(
                    ConstraintFamily.PRECEDENCE, ((job.id, u), (job.id, v)), (pu[2], pv[1]),
                    f"edge ({u}, {v}) of job {job.id}: successor starts at {pv[1]} before predecessor completes at {pu[2]}",
                ))

    by_machine: dict[int, list[tuple[int, int, TaskKey]]] = {}
    for key, (m, start, end) in placed.items():
        by_machine.setdefault(m, []).append((start, end, key))
    for m in sorted(by_machine):
        intervals = sorted(by_machine[m])
        for i, (s1, e1, k1) in enumerate(intervals):
            for s2, e2, k2 in intervals[i + 1:]:
                if s2 >= e1:
                    break
                violations.append(Violation(
                    ConstraintFamily.NO_OVERLAP, (k1, k2), (s1, e1, s2, e2),
                    f"machine {m}: {k1} [{s1},{e1}) overlaps {k2} [{s2},{e2})",
                ))

    for key, (m, start, end) in placed.items():
        if end > instance.horizon:
            violations.append(Violation(
                ConstraintFamily.HORIZON, (key,), (end, instance.horizon),
                f"task {key} completes at {end}, past horizon {instance.horizon}",
            ))

    return FeasibilityReport(tuple(violations))


def occupancy_grid(instance: Instance, schedule: Schedule) -> np.ndarray:
    """Machine x epoch matrix counting the tasks running in each epoch."""
    order = {m.id: row for row, m in enumerate(instance.machines)}
    intervals = schedule.intervals(instance)
    width = max([instance.horizon] + [end for _, _, end in intervals.values()])
    grid = np.zeros((len(instance.machines), width), dtype=np.int64)
    for m, start, end in intervals.values():
        grid[order[m], max(start, 0):end] += 1
    return grid
