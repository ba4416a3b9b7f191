"""greenshop: brute-force enumeration of every feasible schedule of a tiny instance.

No pruning: every (machine, start) combination inside the horizon is generated in
a fixed mixed-radix order, screened with vectorized constraint checks, and each
survivor is certified by `check_feasible` before its objectives are evaluated.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .config import get_oracle_cap
from .errors import InfeasibleError, OracleScaleError, ParameterError, SolverError
from .models import Assignment, Instance, Schedule, check_feasible
from .objectives import ObjectiveReport, evaluate
from .solver import ObjectiveKind
from .traces import CarbonTrace

logger = logging.getLogger(__name__)

CHUNK = 1 << 16


def search_space_size(instance: Instance) -> int:
    return math.prod(len(t.eligible_machines) * instance.horizon for t in instance.tasks())


def enumerate_schedules(
    instance: Instance,
    trace: CarbonTrace | None = None,
    makespan_bound: int | None = None,
    cap: int | None = None,
) -> list[tuple[Schedule, ObjectiveReport]]:
    cap = cap if cap is not None else get_oracle_cap()
    leaves = search_space_size(instance)
    if leaves > cap:
        raise OracleScaleError(leaves, cap)

    keys = sorted(instance.task_map)
    if not keys:
        raise ParameterError("instance has no tasks")
    position = {k: i for i, k in enumerate(keys)}
    limit = min(instance.horizon, makespan_bound or instance.horizon)

    opt_machine, opt_start, opt_end = [], [], []
    for k in keys:
        task = instance.task_map[k]
        rows = [
            (mid, s, s + instance.processing_time(k, mid))
            for mid in sorted(task.eligible_machines)
            for s in range(instance.horizon)
        ]
        m, s, e = zip(*rows)
        opt_machine.append(np.array(m, dtype=np.int64))
        opt_start.append(np.array(s, dtype=np.int64))
        opt_end.append(np.array(e, dtype=np.int64))

    radix = [len(o) for o in opt_machine]
    stride = [math.prod(radix[t + 1:]) for t in range(len(keys))]
    arrival = [instance.job_map[k[0]].arrival for k in keys]
    edges = [
        (position[(job.id, u)], position[(job.id, v)])
        for job in instance.jobs
        for u, v in sorted(job.edges)
    ]
    n = len(keys)

    results: list[tuple[Schedule, ObjectiveReport]] = []
    for lo in range(0, leaves, CHUNK):
        ids = np.arange(lo, min(lo + CHUNK, leaves), dtype=np.int64)
        M = np.empty((ids.size, n), dtype=np.int64)
        S = np.empty_like(M)
        E = np.empty_like(M)
        for t in range(n):
            choice = (ids // stride[t]) % radix[t]
            M[:, t] = opt_machine[t][choice]
            S[:, t] = opt_start[t][choice]
            E[:, t] = opt_end[t][choice]

        ok = E.max(axis=1) <= limit
        for t in range(n):
            ok &= S[:, t] >= arrival[t]
        for u, v in edges:
            ok &= S[:, v] >= E[:, u]
        for t in range(n):
            for u in range(t + 1, n):
                clash = (M[:, t] == M[:, u]) & (S[:, t] < E[:, u]) & (S[:, u] < E[:, t])
                ok &= ~clash

        for row in np.flatnonzero(ok):
            schedule = Schedule({
                k: Assignment(int(M[row, t]), int(S[row, t])) for t, k in enumerate(keys)
            })
            verdict = check_feasible(instance, schedule)
            if not verdict.ok:
                raise SolverError(f"oracle screen accepted an infeasible schedule: {verdict.violations[0].message}")
            results.append((schedule, evaluate(instance, schedule, trace)))

    logger.info("oracle: %d of %d leaves feasible", len(results), leaves)
    return results


def best(
    enumeration: list[tuple[Schedule, ObjectiveReport]],
    objective: ObjectiveKind,
) -> tuple[Schedule, ObjectiveReport]:
    """Lexicographic minimum under the objective's tie-break chain; first in enumeration order on full ties."""
    if not enumeration:
        raise InfeasibleError("oracle enumeration is empty")
    objective = ObjectiveKind(objective)
    return min(enumeration, key=lambda item: objective.key(item[1]))
