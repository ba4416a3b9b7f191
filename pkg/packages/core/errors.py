"""greenshop: exception hierarchy shared by the library and the CLI."""

from __future__ import annotations

from typing import Iterable


class GreenshopError(Exception):
    """Base class for every error greenshop raises on purpose."""


class ConfigError(GreenshopError):
    """Invalid or unreadable configuration."""


class CodecError(GreenshopError):
    """A JSON document does not match its declared schema."""


class ParameterError(GreenshopError):
    """An argument is outside its documented range."""


class EligibilityError(GreenshopError):
    def __init__(self, task: tuple[int, int], machine_id: int) -> None:
        self.task = task
        self.machine_id = machine_id
        super().__init__(f"task {task} cannot run on machine {machine_id}")


class ScheduleReferenceError(GreenshopError):
    """A schedule names a task or machine the instance does not have."""


class DagCycleError(GreenshopError):
    def __init__(self, job_id: int, cycle: Iterable[int]) -> None:
        self.job_id = job_id
        self.cycle = tuple(sorted(set(cycle)))
        super().__init__(f"job {job_id}: dependency cycle through tasks {list(self.cycle)}")


class TemplateError(GreenshopError):
    """A DAG template cannot be instantiated for the requested size."""


class TraceParseError(GreenshopError):
    def __init__(self, row: int, reason: str) -> None:
        self.row = row
        self.reason = reason
        super().__init__(f"row {row}: {reason}")


class TraceExhaustedError(GreenshopError):
    def __init__(self, needed: int, available: int) -> None:
        self.needed = needed
        self.available = available
        super().__init__(f"carbon trace covers {available} epochs, {needed} needed")


class InfeasibleError(GreenshopError):
    """No feasible schedule exists within the active horizon or bound."""


class OracleScaleError(GreenshopError):
    def __init__(self, leaves: int, cap: int) -> None:
        self.leaves = leaves
        self.cap = cap
        super().__init__(f"oracle search space has {leaves} leaves, cap is {cap}")


class UndefinedMetricError(GreenshopError):
    """A metric has no value for the given input (zero makespan, zero baseline)."""


class SolverError(GreenshopError):
    """The solver broke one of its own guarantees."""
