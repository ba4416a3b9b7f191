"""Desk-scale trends over a handful of seeds; deselected by default (run with -m slow)."""

from fractions import Fraction
from statistics import mean

import pytest

from packages.cli.experiment import ExperimentSpec, run_experiment
from packages.cli.report import aggregate, load_results
from packages.core.generator import FleetKind, GeneratorConfig, generate
from packages.core.solver import ObjectiveKind, SolveConfig, solve, solve_stretched
from packages.core.traces import synthetic_sinusoid

pytestmark = pytest.mark.slow

SEEDS = range(8)
NODE_LIMIT = 200_000


def _instance(seed, fleet=FleetKind.HOMOGENEOUS, n_machines=2, k_tasks=3):
    return generate(GeneratorConfig(
        n_jobs=3, k_tasks=k_tasks, n_machines=n_machines, fleet_kind=fleet,
        duration_mean_epochs=Fraction(3), arrival_window_epochs=16, seed=seed,
    ))


def _volatile(length):
    return synthetic_sinusoid(300, 290, 24, 0, length, label="volatile")


def _savings_by_stretch(seed, fleet=FleetKind.HOMOGENEOUS, **shape):
    inst = _instance(seed, fleet, **shape)
    trace = _volatile(inst.horizon)
    baseline = solve(inst, None, SolveConfig(ObjectiveKind.MAKESPAN, node_limit=NODE_LIMIT))
    return {
        s: solve_stretched(inst, trace, baseline, ObjectiveKind.CARBON, s, node_limit=NODE_LIMIT)
        for s in (Fraction(1), Fraction(3, 2), Fraction(2))
    }


@pytest.mark.parametrize("fleet", list(FleetKind))
def test_savings_grow_with_stretch(fleet):
    runs = [_savings_by_stretch(seed, fleet) for seed in SEEDS]
    by_s = {s: mean(float(r[s].carbon_savings_pct) for r in runs) for s in runs[0]}
    assert by_s[Fraction(1)] <= by_s[Fraction(3, 2)] <= by_s[Fraction(2)]
    assert by_s[Fraction(2)] > 0
    for r in runs:
        if all(x.constrained.proven_optimal for x in r.values()):
            assert r[1].carbon_savings_pct <= r[Fraction(3, 2)].carbon_savings_pct <= r[2].carbon_savings_pct


def test_carbon_and_energy_optima_trade_off():
    for seed in SEEDS:
        inst = _instance(seed, FleetKind.HETEROGENEOUS)
        trace = _volatile(inst.horizon)
        baseline = solve(inst, None, SolveConfig(ObjectiveKind.MAKESPAN, node_limit=NODE_LIMIT))
        by_carbon = solve_stretched(inst, trace, baseline, ObjectiveKind.CARBON, 2, node_limit=NODE_LIMIT)
        by_energy = solve_stretched(inst, trace, baseline, ObjectiveKind.ENERGY, 2, node_limit=NODE_LIMIT)
        if not (by_carbon.constrained.proven_optimal and by_energy.constrained.proven_optimal):
            continue
        assert by_carbon.constrained.report.carbon_g <= by_energy.constrained.report.carbon_g
        assert by_energy.constrained.report.energy_kwh <= by_carbon.constrained.report.energy_kwh


def test_more_machines_never_lengthen_the_optimum():
    for seed in SEEDS:
        narrow = solve(_instance(seed, n_machines=1), None, SolveConfig(ObjectiveKind.MAKESPAN, node_limit=NODE_LIMIT))
        wide = solve(_instance(seed, n_machines=3), None, SolveConfig(ObjectiveKind.MAKESPAN, node_limit=NODE_LIMIT))
        if narrow.proven_optimal and wide.proven_optimal:
            assert wide.report.makespan <= narrow.report.makespan


# ── experiment-grid trends ───────────────────────────────────────────────

HIGH_VARIABILITY = {"label": "swing", "synthetic": {"mean": 300, "amplitude": 270, "period": 96}}


def _grid_summary(tmp_path, seeds, **axes):
    spec = ExperimentSpec.from_mapping({
        "n_jobs": [6], "k_tasks": [3], "n_machines": [3], "fleet_kind": ["homogeneous"],
        "seeds": {"start": 0, "count": seeds},
        "duration_mean_epochs": 7, "arrival_window_epochs": 96,
        "traces": [HIGH_VARIABILITY], "stretches": [1], "objectives": ["carbon"],
        "node_limit": NODE_LIMIT, "output_dir": str(tmp_path / "run"),
        **axes,
    })
    frame, skipped = load_results(run_experiment(spec))
    assert skipped == 0
    return aggregate(frame)


def _strictly_increasing(values):
    return all(a < b for a, b in zip(values, values[1:]))


def test_grid_savings_grow_with_stretch(tmp_path):
    summary = _grid_summary(tmp_path, 50, stretches=[1, 2]).set_index("stretch")
    assert summary.loc["1", "instances"] == summary.loc["2", "instances"] == 50
    unit, double = summary.loc["1", "mean_carbon_savings_pct"], summary.loc["2", "mean_carbon_savings_pct"]
    assert unit > 0
    assert double >= 1.5 * unit


def test_grid_more_machines_save_more_and_idle_more(tmp_path):
    summary = _grid_summary(tmp_path, 20, n_machines=[2, 3, 5]).sort_values("n_machines")
    assert list(summary["n_machines"]) == [2, 3, 5]
    assert _strictly_increasing(list(summary["mean_carbon_savings_pct"]))
    assert _strictly_increasing([-u for u in summary["mean_constrained_utilization"]])


def test_grid_more_tasks_save_less_and_busy_more(tmp_path):
    summary = _grid_summary(tmp_path, 20, k_tasks=[2, 3, 4]).sort_values("k_tasks")
    assert list(summary["k_tasks"]) == [2, 3, 4]
    assert _strictly_increasing([-s for s in summary["mean_carbon_savings_pct"]])
    assert _strictly_increasing(list(summary["mean_constrained_utilization"]))
