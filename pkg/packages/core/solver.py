"""greenshop: exact branch-and-bound for makespan, carbon and energy, plus the bi-level stretch protocol.

The search places one task per level. The task placed next is the ready task
(all predecessors placed) with the earliest data-ready epoch, ties by job id
then task index. Its children are every (machine, start) pair that fits on the
machine and still leaves room for the longest remaining path inside the active
makespan bound. Children are visited cheapest-first and pruned when their
lexicographic lower bound meets or exceeds the incumbent.

Costs are kept as integers on a common denominator during the search and turned
back into exact Fractions for the result.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import InfeasibleError, ParameterError, SolverError
from .models import (
    EPOCH_HOURS,
    Assignment,
    Instance,
    Schedule,
    TaskKey,
    as_fraction,
    check_feasible,
    processing_time,
    topological_order,
)
from .objectives import ObjectiveReport, evaluate, makespan, savings
from .traces import CarbonTrace

logger = logging.getLogger(__name__)


class ObjectiveKind(str, Enum):
    MAKESPAN = "makespan"
    CARBON = "carbon"
    ENERGY = "energy"

    @property
    def uses_carbon(self) -> bool:
        return self is not ObjectiveKind.MAKESPAN

    def key(self, report: ObjectiveReport) -> tuple:
        """Tie-break chain: Makespan (makespan,), Carbon (carbon, energy, makespan), Energy (energy, carbon, makespan)."""
        if self is ObjectiveKind.MAKESPAN:
            return (report.makespan,)
        if report.carbon_g is None:
            raise ParameterError(f"{self.value} objective needs a carbon trace")
        if self is ObjectiveKind.CARBON:
            return (report.carbon_g, report.energy_kwh, report.makespan)
        return (report.energy_kwh, report.carbon_g, report.makespan)


@dataclass(frozen=True)
class SolveConfig:
    objective: ObjectiveKind = ObjectiveKind.MAKESPAN
    makespan_bound: int | None = None
    time_limit: float | None = None
    node_limit: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "objective", ObjectiveKind(self.objective))
        for name in ("makespan_bound", "time_limit", "node_limit"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ParameterError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class SolveResult:
    schedule: Schedule
    objective_value: tuple
    report: ObjectiveReport
    proven_optimal: bool
    nodes_explored: int
    wall_time: float
    deterministic: bool = True
    limit_hit: str | None = None


@dataclass(frozen=True)
class BilevelResult:
    opt_makespan: int
    baseline: SolveResult
    constrained: SolveResult
    stretch: Fraction
    makespan_bound: int
    carbon_savings_pct: Fraction
    energy_savings_pct: Fraction


class _LimitReached(Exception):
    def __init__(self, which: str) -> None:
        self.which = which


def _smallest_sums(values: list[int], hi: int, p: int) -> list[int | None]:
    """For each lo, the sum of the p smallest values in values[lo:hi] (None when fewer than p)."""
    sums: list[int | None] = [None] * (hi + 1)
    heap: list[int] = []
    total = 0
    for lo in range(hi - 1, -1, -1):
        heapq.heappush(heap, -values[lo])
        total += values[lo]
        if len(heap) > p:
            total += heapq.heappop(heap)
        if hi - lo >= p:
            sums[lo] = total
    return sums


class _Search:
    def __init__(
        self,
        instance: Instance,
        trace: CarbonTrace | None,
        config: SolveConfig,
        incumbent: Schedule | None,
    ) -> None:
        self.instance = instance
        self.config = config
        self.objective = config.objective
        self.bound = min(instance.horizon, config.makespan_bound or instance.horizon)

        self.keys: list[TaskKey] = sorted(instance.task_map)
        if not self.keys:
            raise ParameterError("instance has no tasks")
        index = {k: i for i, k in enumerate(self.keys)}
        n = len(self.keys)
        machines = instance.machines
        self.machine_ids = [m.id for m in machines]
        self.n_machines = len(machines)

        self.arrival = [instance.job_map[k[0]].arrival for k in self.keys]
        self.preds: list[list[int]] = [[] for _ in range(n)]
        self.succs: list[list[int]] = [[] for _ in range(n)]
        self.topo: list[int] = []
        for job in sorted(instance.jobs, key=lambda j: j.id):
            for u, v in job.edges:
                self.preds[index[(job.id, v)]].append(index[(job.id, u)])
                self.succs[index[(job.id, u)]].append(index[(job.id, v)])
            self.topo.extend(index[(job.id, t)] for t in topological_order(job))

        self.eligible: list[list[int]] = []
        self.ptime: list[dict[int, int]] = []
        for k in self.keys:
            task = instance.task_map[k]
            elig = sorted(
                (mi for mi, m in enumerate(machines) if m.id in task.eligible_machines),
                key=lambda mi: self.machine_ids[mi],
            )
            self.eligible.append(elig)
            self.ptime.append({mi: processing_time(task, machines[mi]) for mi in elig})
        self.minp = [min(p.values()) for p in self.ptime]

        self.tail = [0] * n
        for i in reversed(self.topo):
            self.tail[i] = max((self.minp[s] + self.tail[s] for s in self.succs[i]), default=0)

        power = [m.power_kw * EPOCH_HOURS for m in machines]
        self.energy_den = math.lcm(*(q.denominator for q in power))
        self.energy_unit = [int(q * self.energy_den) for q in power]

        self.trace = trace
        self.prefix: list[int] = []
        self.intensity_den = 1
        self.carbon_lb: list[dict[int, list[int | None]]] = []
        if self.objective.uses_carbon:
            if trace is None:
                raise ParameterError(f"{self.objective.value} objective needs a carbon trace")
            trace.require(self.bound)
            window = trace.intensities[: self.bound]
            self.intensity_den = math.lcm(*(v.denominator for v in window))
            scaled = [int(v * self.intensity_den) for v in window]
            self.prefix = [0]
            for v in scaled:
                self.prefix.append(self.prefix[-1] + v)
            self._build_carbon_bounds(scaled)

        # Search state.
        self.start = [-1] * n
        self.mach = [-1] * n
        self.end = [0] * n
        self.pending_preds = [len(p) for p in self.preds]
        self.ready = {i for i in range(n) if not self.preds[i]}
        self.occ = np.zeros((self.n_machines, self.bound), dtype=bool)
        self.placed = 0
        self.committed_energy = 0
        self.committed_carbon = 0
        self.max_end = 0
        self.rem_min_work = sum(self.minp)
        self.est_lb = [0] * n

        self.nodes = 0
        self.best_key: tuple | None = None
        self.best: list[tuple[int, int]] | None = None
        self.deadline = (
            time.perf_counter() + config.time_limit if config.time_limit is not None else None
        )

        if incumbent is not None:
            self._seed(incumbent)

    def _build_carbon_bounds(self, scaled: list[int]) -> None:
        memo: dict[tuple[int, int], list[int | None]] = {}
        for i in range(len(self.keys)):
            hi = self.bound - self.tail[i]
            per_machine: dict[int, list[int | None]] = {}
            for mi, p in self.ptime[i].items():
                if hi < p:
                    per_machine[mi] = [None] * (self.bound + 1)
                    continue
                if (hi, p) not in memo:
                    memo[(hi, p)] = _smallest_sums(scaled, hi, p)
                sums = memo[(hi, p)]
                unit = self.energy_unit[mi]
                row = [None if s is None else unit * s for s in sums]
                row.extend([None] * (self.bound + 1 - len(row)))
                per_machine[mi] = row
            self.carbon_lb.append(per_machine)

    # -- costs -------------------------------------------------------------

    def _energy(self, i: int, mi: int) -> int:
        return self.energy_unit[mi] * self.ptime[i][mi]

    def _carbon(self, mi: int, s: int, p: int) -> int:
        return self.energy_unit[mi] * (self.prefix[s + p] - self.prefix[s])

    def _key(self, energy: int, carbon: int, span: int) -> tuple:
        if self.objective is ObjectiveKind.MAKESPAN:
            return (span,)
        if self.objective is ObjectiveKind.CARBON:
            return (carbon, energy, span)
        return (energy, carbon, span)

    def _limit(self) -> int:
        """Latest completion epoch worth exploring."""
        if self.objective is ObjectiveKind.MAKESPAN and self.best_key is not None:
            return min(self.bound, self.best_key[0] - 1)
        return self.bound

    # -- state -------------------------------------------------------------

    def _place(self, i: int, mi: int, s: int, p: int) -> int:
        prev_max = self.max_end
        self.start[i], self.mach[i], self.end[i] = s, mi, s + p
        self.occ[mi, s:s + p] = True
        self.committed_energy += self._energy(i, mi)
        if self.objective.uses_carbon:
            self.committed_carbon += self._carbon(mi, s, p)
        self.max_end = max(self.max_end, s + p)
        self.rem_min_work -= self.minp[i]
        self.placed += 1
        self.ready.discard(i)
        for v in self.succs[i]:
            self.pending_preds[v] -= 1
            if self.pending_preds[v] == 0:
                self.ready.add(v)
        return prev_max

    def _unplace(self, i: int, mi: int, s: int, p: int, prev_max: int) -> None:
        for v in self.succs[i]:
            if self.pending_preds[v] == 0:
                self.ready.discard(v)
            self.pending_preds[v] += 1
        self.ready.add(i)
        self.placed -= 1
        self.rem_min_work += self.minp[i]
        self.max_end = prev_max
        if self.objective.uses_carbon:
            self.committed_carbon -= self._carbon(mi, s, p)
        self.committed_energy -= self._energy(i, mi)
        self.occ[mi, s:s + p] = False
        self.start[i], self.mach[i], self.end[i] = -1, -1, 0

    def _seed(self, schedule: Schedule) -> None:
        position = {mid: mi for mi, mid in enumerate(self.machine_ids)}
        if not check_feasible(self.instance, schedule).ok:
            logger.debug("starting schedule is infeasible, ignored")
            return
        energy = carbon = span = 0
        for i, k in enumerate(self.keys):
            a = schedule.assignments[k]
            mi = position[a.machine_id]
            p = self.ptime[i][mi]
            span = max(span, a.start + p)
            if span > self.bound:
                logger.debug("starting schedule exceeds bound %d, ignored", self.bound)
                return
            energy += self._energy(i, mi)
            if self.objective.uses_carbon:
                carbon += self._carbon(mi, a.start, p)
        self.best_key = self._key(energy, carbon, span)
        self.best = [(position[schedule.assignments[k].machine_id], schedule.assignments[k].start) for k in self.keys]

    # -- bounds ------------------------------------------------------------

    def _lower_bound(self) -> tuple | None:
        """Lexicographic lower bound of the current node, None when no completion fits the bound."""
        limit = self._limit()
        lb_span = self.max_end
        t0 = None
        lb_energy = self.committed_energy
        lb_carbon = self.committed_carbon
        uses_carbon = self.objective.uses_carbon
        for i in self.topo:
            if self.start[i] >= 0:
                continue
            e = self.arrival[i]
            for q in self.preds[i]:
                f = self.end[q] if self.start[q] >= 0 else self.est_lb[q] + self.minp[q]
                if f > e:
                    e = f
            self.est_lb[i] = e
            reach = e + self.minp[i] + self.tail[i]
            if reach > limit:
                return None
            if reach > lb_span:
                lb_span = reach
            if t0 is None or e < t0:
                t0 = e
            if self.objective is ObjectiveKind.MAKESPAN:
                continue
            best_e = best_c = None
            for mi, p in self.ptime[i].items():
                if e + p + self.tail[i] > limit:
                    continue
                energy = self.energy_unit[mi] * p
                if best_e is None or energy < best_e:
                    best_e = energy
                if uses_carbon:
                    c = self.carbon_lb[i][mi][e]
                    if c is not None and (best_c is None or c < best_c):
                        best_c = c
            if best_e is None or (uses_carbon and best_c is None):
                return None
            lb_energy += best_e
            if uses_carbon:
                lb_carbon += best_c

        if t0 is not None:
            occupied = int(self.occ[:, t0:].sum())
            lb_load = t0 + -(-(self.rem_min_work + occupied) // self.n_machines)
            if lb_load > limit:
                return None
            lb_span = max(lb_span, lb_load)
        return self._key(lb_energy, lb_carbon, lb_span)

    # -- search ------------------------------------------------------------

    def _check_limits(self) -> None:
        if self.config.node_limit is not None and self.nodes > self.config.node_limit:
            raise _LimitReached("nodes")
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise _LimitReached("time")

    def _pick(self) -> tuple[int, int]:
        best_i, best_est = -1, -1
        for i in self.ready:
            est = max([self.arrival[i]] + [self.end[q] for q in self.preds[i]])
            if best_i < 0 or (est, i) < (best_est, best_i):
                best_i, best_est = i, est
        return best_i, best_est

    def _order(self, i: int, mi: int, s: int, p: int) -> tuple:
        if self.objective is ObjectiveKind.MAKESPAN:
            return (s + p, s, self.machine_ids[mi])
        energy, carbon = self._energy(i, mi), self._carbon(mi, s, p)
        if self.objective is ObjectiveKind.CARBON:
            return (carbon, energy, s + p, self.machine_ids[mi], s)
        return (energy, carbon, s + p, self.machine_ids[mi], s)

    def _dfs(self) -> None:
        self.nodes += 1
        self._check_limits()
        if self.placed == len(self.keys):
            key = self._key(self.committed_energy, self.committed_carbon, self.max_end)
            if self.best_key is None or key < self.best_key:
                self.best_key = key
                self.best = list(zip(self.mach, self.start))
            return

        i, est = self._pick()
        limit = self._limit()
        children = []
        for mi in self.eligible[i]:
            p = self.ptime[i][mi]
            row = self.occ[mi]
            for s in range(est, limit - self.tail[i] - p + 1):
                if not row[s:s + p].any():
                    children.append((self._order(i, mi, s, p), mi, s, p))
        children.sort()

        for _, mi, s, p in children:
            if s + p + self.tail[i] > self._limit():
                continue
            prev_max = self._place(i, mi, s, p)
            lb = self._lower_bound()
            if lb is not None and (self.best_key is None or lb < self.best_key):
                self._dfs()
            self._unplace(i, mi, s, p, prev_max)

    def run(self) -> tuple[bool, str | None]:
        """Search until exhausted or a limit trips; returns (proven_optimal, limit_hit)."""
        root = self._lower_bound()
        if root is None or (self.best_key is not None and root >= self.best_key):
            return True, None
        try:
            self._dfs()
        except _LimitReached as hit:
            return False, hit.which
        return True, None

    def schedule(self) -> Schedule:
        assert self.best is not None
        return Schedule({
            k: Assignment(self.machine_ids[mi], s) for k, (mi, s) in zip(self.keys, self.best)
        })


def greedy_baseline(instance: Instance) -> Schedule:
    """List scheduling: ready task with the earliest start, on the machine finishing it first."""
    keys = sorted(instance.task_map)
    if not keys:
        raise ParameterError("instance has no tasks")
    free = {m.id: 0 for m in instance.machines}
    end: dict[TaskKey, int] = {}
    assignments: dict[TaskKey, Assignment] = {}

    while len(assignments) < len(keys):
        best = None
        for key in keys:
            if key in assignments:
                continue
            job = instance.job_map[key[0]]
            preds = [(job.id, u) for u in job.predecessors[key[1]]]
            if any(q not in end for q in preds):
                continue
            est = max([job.arrival] + [end[q] for q in preds])
            if best is None or (est, key) < best:
                best = (est, key)
        est, key = best
        task = instance.task_map[key]
        choice = None
        for mid in sorted(task.eligible_machines):
            machine = instance.machine_map[mid]
            finish = max(est, free[mid]) + processing_time(task, machine)
            rank = (finish, -machine.speed, mid)
            if choice is None or rank < choice:
                choice = rank
        finish, _, mid = choice
        start = finish - instance.processing_time(key, mid)
        assignments[key] = Assignment(mid, start)
        end[key] = finish
        free[mid] = finish

    return Schedule(assignments)


def solve(
    instance: Instance,
    trace: CarbonTrace | None,
    config: SolveConfig,
    incumbent: Schedule | None = None,
) -> SolveResult:
    """Lexicographically optimal schedule for `config.objective`, or the best incumbent within limits."""
    began = time.perf_counter()
    if incumbent is None:
        incumbent = greedy_baseline(instance)
    search = _Search(instance, trace, config, incumbent)
    logger.info(
        "solve %s: %d tasks, %d machines, bound %d",
        config.objective.value, len(search.keys), search.n_machines, search.bound,
    )
    proven, limit_hit = search.run()
    wall = time.perf_counter() - began

    if search.best is None:
        if limit_hit:
            raise InfeasibleError(f"no feasible schedule found before the {limit_hit} limit")
        raise InfeasibleError(f"no feasible schedule completes within {search.bound} epochs")
    if limit_hit:
        logger.warning("solve %s stopped on %s limit after %d nodes", config.objective.value, limit_hit, search.nodes)

    schedule = search.schedule()
    verdict = check_feasible(instance, schedule)
    if not verdict.ok:
        raise SolverError(f"solver produced an infeasible schedule: {verdict.violations[0].message}")

    use_trace = trace
    if trace is not None and not config.objective.uses_carbon and len(trace) < makespan(instance, schedule):
        logger.warning("trace shorter than the makespan, carbon left unevaluated")
        use_trace = None
    report = evaluate(instance, schedule, use_trace)
    if report.makespan > search.bound:
        raise SolverError(f"solver returned makespan {report.makespan} above bound {search.bound}")

    logger.info(
        "solve %s done: makespan %d, nodes %d, proven %s, %.3fs",
        config.objective.value, report.makespan, search.nodes, proven, wall,
    )
    return SolveResult(
        schedule=schedule,
        objective_value=config.objective.key(report),
        report=report,
        proven_optimal=proven,
        nodes_explored=search.nodes,
        wall_time=wall,
        deterministic=config.time_limit is None,
        limit_hit=limit_hit,
    )


def stretched_bound(stretch: Fraction | float | str, opt_makespan: int) -> int:
    stretch = as_fraction(stretch)
    if stretch < 1:
        raise ParameterError(f"stretch factor must be >= 1, got {stretch}")
    return math.floor(stretch * opt_makespan)


def solve_stretched(
    instance: Instance,
    trace: CarbonTrace,
    baseline: SolveResult,
    objective: ObjectiveKind,
    stretch: Fraction | float | str,
    *,
    time_limit: float | None = None,
    node_limit: int | None = None,
) -> BilevelResult:
    """Stage two: re-solve under makespan <= floor(S x OPT), seeded with the baseline schedule."""
    objective = ObjectiveKind(objective)
    if not objective.uses_carbon:
        raise ParameterError("the stretched stage optimizes carbon or energy")
    stretch = as_fraction(stretch)
    opt = baseline.report.makespan
    bound = stretched_bound(stretch, opt)
    config = SolveConfig(objective, makespan_bound=bound, time_limit=time_limit, node_limit=node_limit)
    constrained = solve(instance, trace, config, incumbent=baseline.schedule)

    base_report = baseline.report
    if base_report.carbon_g is None:
        base_report = evaluate(instance, baseline.schedule, trace)
    return BilevelResult(
        opt_makespan=opt,
        baseline=baseline,
        constrained=constrained,
        stretch=stretch,
        makespan_bound=bound,
        carbon_savings_pct=savings(base_report.carbon_g, constrained.report.carbon_g),
        energy_savings_pct=savings(base_report.energy_kwh, constrained.report.energy_kwh),
    )


def solve_bilevel(
    instance: Instance,
    trace: CarbonTrace,
    objective: ObjectiveKind,
    stretch: Fraction | float | str,
    *,
    time_limit: float | None = None,
    node_limit: int | None = None,
) -> BilevelResult:
    """Minimize makespan, then carbon or energy under the stretched makespan budget."""
    baseline = solve(
        instance, trace,
        SolveConfig(ObjectiveKind.MAKESPAN, time_limit=time_limit, node_limit=node_limit),
    )
    return solve_stretched(
        instance, trace, baseline, objective, stretch,
        time_limit=time_limit, node_limit=node_limit,
    )
