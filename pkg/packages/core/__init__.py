"""greenshop core: shared models, traces, generator, objectives, solver, oracle and codec."""

from .config import get_config, get_log_level, load_config_file
from .errors import GreenshopError
from .generator import FleetKind, GeneratorConfig, generate
from .models import (
    Assignment,
    Instance,
    Job,
    Machine,
    Schedule,
    Task,
    check_feasible,
    processing_time,
    topological_order,
)
from .objectives import ObjectiveReport, evaluate, savings
from .oracle import best, enumerate_schedules
from .solver import ObjectiveKind, SolveConfig, solve, solve_bilevel
from .traces import CarbonTrace, load_hourly_csv, synthetic_sinusoid

__all__ = [
    "get_config",
    "get_log_level",
    "load_config_file",
    "GreenshopError",
    "FleetKind",
    "GeneratorConfig",
    "generate",
    "Assignment",
    "Instance",
    "Job",
    "Machine",
    "Schedule",
    "Task",
    "check_feasible",
    "processing_time",
    "topological_order",
    "ObjectiveReport",
    "evaluate",
    "savings",
    "best",
    "enumerate_schedules",
    "ObjectiveKind",
    "SolveConfig",
    "solve",
    "solve_bilevel",
    "CarbonTrace",
    "load_hourly_csv",
    "synthetic_sinusoid",
]
