from fractions import Fraction

import pytest

from conftest import chain, machine, make_instance, tiny_instance, trace_of
from packages.core.errors import TraceExhaustedError, UndefinedMetricError
from packages.core.generator import FleetKind, GeneratorConfig, generate
from packages.core.models import Assignment, Schedule
from packages.core.objectives import carbon, energy, evaluate, makespan, savings, utilization
from packages.core.oracle import enumerate_schedules
from packages.core.solver import greedy_baseline


def _one_task(duration, power=1, speed=1, start=0, horizon=None):
    inst = make_instance([([duration], (), 0)], machines=[machine(0, power, speed)], horizon=horizon)
    return inst, Schedule({(0, 0): Assignment(0, start)})


def test_makespan_single_task():
    inst, schedule = _one_task(5)
    assert makespan(inst, schedule) == 5


def test_makespan_is_latest_completion():
    inst = make_instance([([8], (), 0), ([13], (), 0)], machines=[machine(0), machine(1)])
    schedule = Schedule({(0, 0): Assignment(0, 0), (1, 0): Assignment(1, 0)})
    assert makespan(inst, schedule) == 13


def test_makespan_two_chains_by_hand():
    inst = make_instance([([3, 2, 4], chain(3), 0), ([2, 3], chain(2), 0)], machines=[machine(0), machine(1)])
    schedule = greedy_baseline(inst)
    # J0 runs 0-3-5-9 on machine 0, J1 runs 0-2-5 on machine 1.
    assert schedule.intervals(inst)[(0, 2)] == (0, 5, 9)
    assert makespan(inst, schedule) == 9


def test_energy_one_hour():
    inst, schedule = _one_task(4)
    assert energy(inst, schedule) == 1


def test_energy_fast_server():
    inst, schedule = _one_task(10, power=2, speed=2)
    assert energy(inst, schedule) == Fraction(5, 2)


def test_carbon_by_hand():
    inst, schedule = _one_task(2)
    assert carbon(inst, schedule, trace_of(100, 300, 300)) == 100


def test_carbon_depends_on_start():
    inst, schedule = _one_task(2, start=1, horizon=3)
    assert carbon(inst, schedule, trace_of(100, 300, 300)) == 150


def test_carbon_trace_too_short():
    inst, schedule = _one_task(3)
    with pytest.raises(TraceExhaustedError):
        carbon(inst, schedule, trace_of(100, 100))


def test_utilization_full_and_half():
    inst = make_instance([([2, 3], chain(2), 0)])
    packed = Schedule({(0, 0): Assignment(0, 0), (0, 1): Assignment(0, 2)})
    assert utilization(inst, packed) == 1

    inst2 = make_instance([([4], (), 0)], machines=[machine(0), machine(1)])
    assert utilization(inst2, Schedule({(0, 0): Assignment(1, 0)})) == Fraction(1, 2)


@pytest.mark.parametrize("base,cand,expected", [(200, 150, 25), (100, 100, 0), (100, 110, -10)])
def test_savings(base, cand, expected):
    assert savings(base, cand) == expected


def test_savings_zero_baseline():
    with pytest.raises(UndefinedMetricError):
        savings(0, 5)


def test_evaluate_without_trace():
    inst, schedule = _one_task(4)
    report = evaluate(inst, schedule)
    assert report.carbon_g is None
    assert (report.makespan, report.energy_kwh, report.utilization) == (4, 1, 1)


# ── properties over enumerated schedules ─────────────────────────────────

@pytest.mark.parametrize("seed", range(8))
def test_constant_trace_carbon_is_scaled_energy(seed):
    inst = tiny_instance(seed)
    trace = trace_of(*[Fraction(317, 2)] * inst.horizon)
    for schedule, report in enumerate_schedules(inst, trace)[:500]:
        assert report.carbon_g == Fraction(317, 2) * report.energy_kwh
        assert 0 < report.utilization <= 1


def test_homogeneous_energy_is_schedule_invariant():
    inst = generate(GeneratorConfig(n_jobs=3, k_tasks=3, n_machines=2, seed=5))
    expected = sum(Fraction(t.base_duration, 4) for t in inst.tasks())
    greedy = greedy_baseline(inst)
    assert energy(inst, greedy) == expected
    # Same placement with machine ids swapped.
    swapped = Schedule({k: Assignment(1 - a.machine_id, a.start) for k, a in greedy.assignments.items()})
    assert energy(inst, swapped) == expected
    assert makespan(inst, swapped) == makespan(inst, greedy)


def test_relabeling_identical_machines_preserves_objectives():
    inst = generate(GeneratorConfig(n_jobs=3, k_tasks=2, n_machines=3, fleet_kind=FleetKind.HOMOGENEOUS, seed=9))
    trace = trace_of(*range(1, inst.horizon + 1))
    schedule = greedy_baseline(inst)
    relabel = {0: 2, 1: 0, 2: 1}
    moved = Schedule({k: Assignment(relabel[a.machine_id], a.start) for k, a in schedule.assignments.items()})
    assert evaluate(inst, schedule, trace) == evaluate(inst, moved, trace)
