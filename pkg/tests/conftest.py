import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from packages.core import config as core_config
from packages.core.models import Instance, Job, Machine, Task
from packages.core.traces import CarbonTrace


def machine(mid, power=1, speed=1):
    return Machine(mid, Fraction(power), Fraction(speed))


def job(jid, durations, edges=(), arrival=0, eligible=None):
    """Task i of the job has base duration durations[i]."""
    tasks = tuple(
        Task(jid, i, d, frozenset(eligible if eligible is not None else {0}))
        for i, d in enumerate(durations)
    )
    return Job(jid, arrival, tasks, frozenset(edges))


def make_instance(specs, machines=None, horizon=None, eligible=None, name="test"):
    """specs: list of (durations, edges, arrival); every task may use every machine unless `eligible` is given."""
    machines = tuple(machines or (machine(0),))
    ids = frozenset(eligible if eligible is not None else (m.id for m in machines))
    jobs = tuple(job(j, durations, edges, arrival, ids) for j, (durations, edges, arrival) in enumerate(specs))
    return Instance(jobs, machines, horizon, name)


def chain(k):
    return tuple((i, i + 1) for i in range(k - 1))


def trace_of(*values, label="test"):
    return CarbonTrace(tuple(Fraction(v) for v in values), label)


def tiny_instance(seed):
    """2 to 4 unit-ish tasks over 1 to 3 jobs on 1 or 2 machines, small enough for the oracle."""
    rng = np.random.default_rng(seed)
    n_machines = int(rng.integers(1, 3))
    heterogeneous = bool(rng.integers(2))
    machines = tuple(
        machine(m, power=[1, 2][m] if heterogeneous else 1, speed=[1, 2][m] if heterogeneous else 1)
        for m in range(n_machines)
    )
    n_tasks = int(rng.integers(2, 5))
    specs = []
    left = n_tasks
    while left:
        k = int(rng.integers(1, min(left, 2) + 1))
        durations = [int(rng.integers(1, 3)) for _ in range(k)]
        specs.append((durations, chain(k), int(rng.integers(0, 3))))
        left -= k
    return make_instance(specs, machines, name=f"tiny-{seed}")


def tiny_trace(seed, length):
    rng = np.random.default_rng(seed + 10_000)
    return CarbonTrace(tuple(Fraction(int(v)) for v in rng.integers(0, 500, size=length)), f"rand-{seed}")


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """No test reads the developer's ~/.greenshop/config.yaml or GREENSHOP_* variables."""
    for var in ("GREENSHOP_LOG_LEVEL", "GREENSHOP_WORKERS", "GREENSHOP_ORACLE_CAP",
                "GREENSHOP_NODE_LIMIT", "GREENSHOP_TIME_LIMIT"):
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("GREENSHOP_HOME", str(tmp_path / "greenshop-home"))
    core_config.reset_config_cache()
    yield
    core_config.reset_config_cache()


@pytest.fixture
def two_hour_csv(tmp_path):
    path = tmp_path / "trace.csv"
    path.write_text(
        "timestamp,carbon_intensity\n"
        "2024-01-01T00:00:00Z,100\n"
        "2024-01-01T01:00:00Z,200\n"
    )
    return path
