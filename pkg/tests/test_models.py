from fractions import Fraction

import numpy as np
import pytest

from conftest import chain, machine, make_instance, tiny_instance
from packages.core.errors import DagCycleError, EligibilityError, ParameterError, ScheduleReferenceError
from packages.core.models import (
    Assignment,
    ConstraintFamily,
    Job,
    Schedule,
    Task,
    check_feasible,
    default_horizon,
    occupancy_grid,
    processing_time,
    topological_order,
)
from packages.core.solver import greedy_baseline

SPEEDS = [Fraction(1, 3), Fraction(1, 2), Fraction(1), Fraction(4, 3), Fraction(2)]


# ── processing_time ──────────────────────────────────────────────────────

def test_processing_time_server_classes():
    task = Task(0, 0, 10, frozenset(range(5)))
    times = [processing_time(task, machine(i, speed=s)) for i, s in enumerate(SPEEDS)]
    assert times == [30, 20, 10, 8, 5]


@pytest.mark.parametrize("base,speed,expected", [(4, 1, 4), (1, 2, 1), (3, 4, 1), (7, Fraction(4, 3), 6)])
def test_processing_time_rounding(base, speed, expected):
    assert processing_time(Task(0, 0, base, frozenset({0})), machine(0, speed=speed)) == expected


def test_processing_time_antitone_in_speed():
    for base in range(1, 40):
        task = Task(0, 0, base, frozenset(range(5)))
        times = [processing_time(task, machine(i, speed=s)) for i, s in enumerate(SPEEDS)]
        assert all(t >= 1 for t in times)
        assert times == sorted(times, reverse=True)


def test_processing_time_ineligible():
    with pytest.raises(EligibilityError) as exc:
        processing_time(Task(2, 1, 3, frozenset({0})), machine(1))
    assert exc.value.task == (2, 1)
    assert exc.value.machine_id == 1


# ── construction ─────────────────────────────────────────────────────────

def test_default_horizon_uses_slowest_machine():
    inst = make_instance([([2, 3], chain(2), 5)], machines=[machine(0), machine(1, speed=2)])
    assert inst.horizon == 5 + 2 + 3
    assert default_horizon(inst.jobs, inst.machines) == inst.horizon


def test_explicit_horizon_must_be_positive():
    with pytest.raises(ParameterError):
        make_instance([([1], (), 0)], horizon=0)


def test_unknown_eligible_machine_rejected():
    with pytest.raises(ParameterError):
        make_instance([([1], (), 0)], eligible={0, 7})


def test_duplicate_machine_ids_rejected():
    with pytest.raises(ParameterError):
        make_instance([([1], (), 0)], machines=[machine(0), machine(0)])


@pytest.mark.parametrize("power,speed", [(0, 1), (1, 0), (-1, 1)])
def test_machine_requires_positive_parameters(power, speed):
    with pytest.raises(ParameterError):
        machine(0, power=power, speed=speed)


def test_task_rejects_empty_eligibility():
    with pytest.raises(ParameterError):
        Task(0, 0, 1, frozenset())


def test_edge_out_of_range_rejected():
    with pytest.raises(ParameterError):
        make_instance([([1, 1], [(0, 2)], 0)])


# ── topological_order ────────────────────────────────────────────────────

def _job(k, edges):
    return Job(0, 0, tuple(Task(0, i, 1, frozenset({0})) for i in range(k)), frozenset(edges))


def test_topological_order_chain():
    assert topological_order(_job(4, chain(4))) == [0, 1, 2, 3]


def test_topological_order_fan_out():
    assert topological_order(_job(4, [(0, 1), (0, 2), (0, 3)])) == [0, 1, 2, 3]


def test_topological_order_ties_by_index():
    assert topological_order(_job(4, [(3, 0), (2, 1)])) == [2, 1, 3, 0]


def test_topological_order_cycle():
    with pytest.raises(DagCycleError) as exc:
        _job(2, [(1, 0), (0, 1)])
    assert exc.value.cycle == (0, 1)
    assert exc.value.job_id == 0


# ── check_feasible ───────────────────────────────────────────────────────

def _chain_instance():
    return make_instance([([2, 3], chain(2), 0)])


def test_tight_chain_is_feasible():
    inst = _chain_instance()
    verdict = check_feasible(inst, Schedule({(0, 0): Assignment(0, 0), (0, 1): Assignment(0, 2)}))
    assert verdict.ok


def test_precedence_violation():
    inst = _chain_instance()
    verdict = check_feasible(inst, Schedule({(0, 0): Assignment(0, 0), (0, 1): Assignment(0, 1)}))
    assert ConstraintFamily.PRECEDENCE in verdict.families()
    violation = next(v for v in verdict.violations if v.family is ConstraintFamily.PRECEDENCE)
    assert violation.tasks == ((0, 0), (0, 1))


def test_no_overlap_violation_lists_both_tasks():
    inst = make_instance([([3], (), 0), ([3], (), 0)])
    verdict = check_feasible(inst, Schedule({(0, 0): Assignment(0, 0), (1, 0): Assignment(0, 2)}))
    assert verdict.families() == {ConstraintFamily.NO_OVERLAP}
    assert set(verdict.violations[0].tasks) == {(0, 0), (1, 0)}


def test_arrival_violation():
    inst = make_instance([([1], (), 4)])
    verdict = check_feasible(inst, Schedule({(0, 0): Assignment(0, 3)}))
    assert verdict.families() == {ConstraintFamily.ARRIVAL}


def test_missing_assignment():
    inst = _chain_instance()
    verdict = check_feasible(inst, Schedule({(0, 0): Assignment(0, 0)}))
    assert verdict.families() == {ConstraintFamily.ASSIGNMENT}


def test_ineligible_machine():
    inst = make_instance([([1], (), 0)], machines=[machine(0), machine(1)], eligible={0})
    verdict = check_feasible(inst, Schedule({(0, 0): Assignment(1, 0)}))
    assert verdict.families() == {ConstraintFamily.ASSIGNMENT}


def test_declared_completion_checked():
    inst = make_instance([([2], (), 0)])
    assert check_feasible(inst, Schedule({(0, 0): Assignment(0, 0, 2)})).ok
    verdict = check_feasible(inst, Schedule({(0, 0): Assignment(0, 0, 3)}))
    assert verdict.families() == {ConstraintFamily.COMPLETION}


def test_horizon_violation():
    inst = make_instance([([2], (), 0)], horizon=3)
    verdict = check_feasible(inst, Schedule({(0, 0): Assignment(0, 2)}))
    assert verdict.families() == {ConstraintFamily.HORIZON}


def test_unknown_task_is_a_reference_error():
    inst = _chain_instance()
    with pytest.raises(ScheduleReferenceError):
        check_feasible(inst, Schedule({(0, 0): Assignment(0, 0), (0, 1): Assignment(0, 2), (5, 0): Assignment(0, 9)}))


def test_unknown_machine_is_a_reference_error():
    inst = _chain_instance()
    with pytest.raises(ScheduleReferenceError):
        check_feasible(inst, Schedule({(0, 0): Assignment(3, 0), (0, 1): Assignment(0, 2)}))


def _naive_feasible(inst, schedule):
    """Independent re-derivation of the constraints straight from the assignment map."""
    if set(schedule.assignments) != set(inst.task_map):
        return False
    spans = {}
    for key, a in schedule.assignments.items():
        task = inst.task_map[key]
        if a.machine_id not in task.eligible_machines:
            return False
        speed = inst.machine_map[a.machine_id].speed
        p = max(1, -(-Fraction(task.base_duration) // speed))
        spans[key] = (a.machine_id, a.start, a.start + int(p))
    for job in inst.jobs:
        for t in job.tasks:
            if spans[t.key][1] < job.arrival or spans[t.key][2] > inst.horizon:
                return False
        for u, v in job.edges:
            if spans[(job.id, v)][1] < spans[(job.id, u)][2]:
                return False
    for m in inst.machine_map:
        used = set()
        for mid, s, e in spans.values():
            if mid != m:
                continue
            epochs = set(range(s, e))
            if used & epochs:
                return False
            used |= epochs
    return True


@pytest.mark.parametrize("seed", range(30))
def test_checker_agrees_with_naive_rederivation(seed):
    inst = tiny_instance(seed)
    rng = np.random.default_rng(seed)
    ids = sorted(inst.machine_map)
    for _ in range(40):
        schedule = Schedule({
            key: Assignment(int(rng.choice(ids)), int(rng.integers(0, inst.horizon)))
            for key in sorted(inst.task_map)
        })
        assert check_feasible(inst, schedule).ok == _naive_feasible(inst, schedule)


@pytest.mark.parametrize("seed", range(20))
def test_feasible_schedules_have_single_occupancy(seed):
    inst = tiny_instance(seed)
    schedule = greedy_baseline(inst)
    assert check_feasible(inst, schedule).ok
    grid = occupancy_grid(inst, schedule)
    assert grid.shape[0] == len(inst.machines)
    assert grid.max() <= 1
    assert grid.sum() == sum(e - s for _, s, e in schedule.intervals(inst).values())
