from math import comb

import pytest

from conftest import chain, machine, make_instance, trace_of
from packages.core.errors import InfeasibleError, OracleScaleError, ParameterError
from packages.core.models import Assignment, Instance, Schedule, check_feasible
from packages.core.objectives import ObjectiveReport
from packages.core.oracle import best, enumerate_schedules, search_space_size
from packages.core.solver import ObjectiveKind


def _starts(enumeration):
    return [tuple(a.start for _, a in sorted(s.assignments.items())) for s, _ in enumeration]


def test_single_task_starts():
    inst = make_instance([([2], (), 0)], horizon=4)
    assert sorted(_starts(enumerate_schedules(inst))) == [(0,), (1,), (2,)]


def test_chain_start_pairs():
    inst = make_instance([([1, 1], chain(2), 0)], horizon=3)
    assert sorted(_starts(enumerate_schedules(inst))) == [(0, 1), (0, 2), (1, 2)]


@pytest.mark.parametrize("durations,horizon", [
    ([1], 5), ([2, 1], 6), ([1, 1, 1], 6), ([2, 1, 2], 8), ([1, 2, 1, 1], 7),
])
def test_single_machine_chain_count(durations, horizon):
    k = len(durations)
    inst = make_instance([(durations, chain(k), 0)], horizon=horizon)
    assert len(enumerate_schedules(inst)) == comb(horizon - sum(durations) + k, k)


def test_every_schedule_is_feasible_and_unique():
    inst = make_instance([([1, 2], chain(2), 0), ([1], (), 1)], machines=[machine(0), machine(1)], horizon=5)
    enumeration = enumerate_schedules(inst)
    seen = set()
    for schedule, _ in enumeration:
        assert check_feasible(inst, schedule).ok
        key = tuple(sorted(schedule.assignments.items()))
        assert key not in seen
        seen.add(key)


def test_makespan_bound_filters():
    inst = make_instance([([2], (), 0)], horizon=6)
    bounded = enumerate_schedules(inst, makespan_bound=3)
    assert sorted(_starts(bounded)) == [(0,), (1,)]


def test_reports_carry_carbon_when_traced():
    inst = make_instance([([2], (), 0)], horizon=4)
    enumeration = enumerate_schedules(inst, trace_of(300, 300, 100, 100))
    carbons = {s.assignments[(0, 0)].start: r.carbon_g for s, r in enumeration}
    assert carbons == {0: 150, 1: 100, 2: 50}


def test_cap_is_on_leaves():
    inst = make_instance([([1], (), 0), ([1], (), 0)], machines=[machine(0), machine(1)], horizon=10)
    assert search_space_size(inst) == 400
    with pytest.raises(OracleScaleError) as exc:
        enumerate_schedules(inst, cap=399)
    assert exc.value.leaves == 400
    assert len(enumerate_schedules(inst, cap=400)) > 0


def test_cap_from_environment(monkeypatch):
    monkeypatch.setenv("GREENSHOP_ORACLE_CAP", "10")
    inst = make_instance([([1], (), 0)], horizon=11)
    with pytest.raises(OracleScaleError):
        enumerate_schedules(inst)


def test_empty_instance_rejected():
    with pytest.raises(ParameterError):
        enumerate_schedules(Instance((), (machine(0),)))


# ── best ─────────────────────────────────────────────────────────────────

def _entry(start, makespan, energy, carbon):
    return Schedule({(0, 0): Assignment(0, start)}), ObjectiveReport(makespan, energy, carbon, 1)


def test_best_unique_makespan_minimizer():
    entries = [_entry(0, 5, 1, 10), _entry(1, 3, 1, 10), _entry(2, 4, 1, 10)]
    schedule, report = best(entries, ObjectiveKind.MAKESPAN)
    assert report.makespan == 3


def test_best_carbon_tie_goes_to_lower_energy():
    entries = [_entry(0, 3, 2, 10), _entry(1, 4, 1, 10)]
    schedule, _ = best(entries, ObjectiveKind.CARBON)
    assert schedule.assignments[(0, 0)].start == 1


def test_best_full_tie_keeps_enumeration_order():
    entries = [_entry(0, 3, 1, 10), _entry(1, 3, 1, 10)]
    schedule, _ = best(entries, ObjectiveKind.ENERGY)
    assert schedule.assignments[(0, 0)].start == 0


def test_best_of_nothing():
    with pytest.raises(InfeasibleError):
        best([], ObjectiveKind.MAKESPAN)
