"""greenshop: makespan, energy, carbon, utilization and savings of a feasible schedule.

All functions assume the schedule already passed `check_feasible`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import UndefinedMetricError
from .models import EPOCH_HOURS, Instance, Schedule
from .traces import CarbonTrace


@dataclass(frozen=True)
class ObjectiveReport:
    makespan: int
    energy_kwh: Fraction
    carbon_g: Fraction | None
    utilization: Fraction


def makespan(instance: Instance, schedule: Schedule) -> int:
    intervals = schedule.intervals(instance)
    return max((end for _, _, end in intervals.values()), default=0)


def energy(instance: Instance, schedule: Schedule) -> Fraction:
    total = Fraction(0)
    for m, start, end in schedule.intervals(instance).values():
        total += instance.machine_map[m].power_kw * (end - start) * EPOCH_HOURS
    return total


def carbon(instance: Instance, schedule: Schedule, trace: CarbonTrace) -> Fraction:
    intervals = schedule.intervals(instance)
    trace.require(max((end for _, _, end in intervals.values()), default=0))
    total = Fraction(0)
    for m, start, end in intervals.values():
        total += instance.machine_map[m].power_kw * EPOCH_HOURS * trace.window_sum(start, end)
    return total


def utilization(instance: Instance, schedule: Schedule) -> Fraction:
    span = makespan(instance, schedule)
    if span == 0 or not instance.machines:
        raise UndefinedMetricError("utilization is undefined for a zero makespan")
    busy = sum(end - start for _, start, end in schedule.intervals(instance).values())
    return Fraction(busy, len(instance.machines) * span)


def savings(baseline_value: Fraction | int, candidate_value: Fraction | int) -> Fraction:
    """Percentage saved relative to the baseline; negative when the candidate is worse."""
    if baseline_value == 0:
        raise UndefinedMetricError("savings relative to a zero baseline are undefined")
    return 100 * (1 - Fraction(candidate_value) / Fraction(baseline_value))


def evaluate(instance: Instance, schedule: Schedule, trace: CarbonTrace | None = None) -> ObjectiveReport:
    return ObjectiveReport(
        makespan=makespan(instance, schedule),
        energy_kwh=energy(instance, schedule),
        carbon_g=carbon(instance, schedule, trace) if trace is not None else None,
        utilization=utilization(instance, schedule),
    )
