"""greenshop: seeded instance generator (fleets, DAG templates, exponential durations, arrivals)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError, ParameterError, TemplateError
from .models import Instance, Job, Machine, Task, as_fraction


class FleetKind(str, Enum):
    HOMOGENEOUS = "homogeneous"
    HETEROGENEOUS = "heterogeneous"


class DagTemplate(str, Enum):
    CHAIN = "chain"
    TWO_BRANCH = "two_branch"
    FAN_OUT = "fan_out"


# (power_kw, speed) per server class, relative to the 1 kW baseline server.
SERVER_CLASSES: tuple[tuple[Fraction, Fraction], ...] = (
    (Fraction(1, 4), Fraction(1, 3)),
    (Fraction(1, 2), Fraction(1, 2)),
    (Fraction(1), Fraction(1)),
    (Fraction(3, 2), Fraction(4, 3)),
    (Fraction(2), Fraction(2)),
)


@dataclass
class GeneratorConfig:
    n_jobs: int = 10
    k_tasks: int = 4
    n_machines: int = 5
    fleet_kind: FleetKind = FleetKind.HOMOGENEOUS
    duration_mean_epochs: Fraction = Fraction(7)
    arrival_window_epochs: int = 96
    seed: int = 0

    def __post_init__(self) -> None:
        try:
            self.fleet_kind = FleetKind(self.fleet_kind)
        except ValueError as e:
            raise ConfigError(f"unknown fleet_kind {self.fleet_kind!r}") from e
        try:
            self.duration_mean_epochs = as_fraction(self.duration_mean_epochs)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad duration_mean_epochs {self.duration_mean_epochs!r}") from e
        self.validate()

    def validate(self) -> None:
        for name in ("n_jobs", "k_tasks", "n_machines", "arrival_window_epochs"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.duration_mean_epochs <= 0:
            raise ConfigError(f"duration_mean_epochs must be positive, got {self.duration_mean_epochs}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit non-negative integer, got {self.seed!r}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> GeneratorConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown generator fields {sorted(unknown)}")
        return cls(**dict(data))

    def to_mapping(self) -> dict[str, Any]:
        d = asdict(self)
        d["fleet_kind"] = self.fleet_kind.value
        d["duration_mean_epochs"] = str(self.duration_mean_epochs)
        return d


def make_fleet(kind: FleetKind | str, n_machines: int) -> list[Machine]:
    kind = FleetKind(kind)
    if n_machines < 1:
        raise ParameterError(f"n_machines must be >= 1, got {n_machines}")
    if kind is FleetKind.HOMOGENEOUS:
        return [Machine(i, Fraction(1), Fraction(1)) for i in range(n_machines)]
    # Fleets larger than the class list cycle through it.
    return [Machine(i, *SERVER_CLASSES[i % len(SERVER_CLASSES)]) for i in range(n_machines)]


def instantiate_template(template: DagTemplate | str, k: int) -> frozenset[tuple[int, int]]:
    template = DagTemplate(template)
    if k < 1:
        raise TemplateError(f"k must be >= 1, got {k}")
    if template is DagTemplate.CHAIN:
        return frozenset((i, i + 1) for i in range(k - 1))
    if template is DagTemplate.FAN_OUT:
        return frozenset((0, i) for i in range(1, k))

    if k < 3:
        raise TemplateError(f"two_branch needs k >= 3, got {k}")
    long_len = math.ceil((k - 1) / 2)
    edges = set()
    prev = 0
    for i in range(1, long_len + 1):
        edges.add((prev, i))
        prev = i
    prev = 0
    for i in range(long_len + 1, k):
        edges.add((prev, i))
        prev = i
    return frozenset(edges)


def templates_for(k: int) -> tuple[DagTemplate, ...]:
    if k >= 3:
        return (DagTemplate.CHAIN, DagTemplate.TWO_BRANCH, DagTemplate.FAN_OUT)
    return (DagTemplate.CHAIN, DagTemplate.FAN_OUT)


def discretize_duration(x: float) -> int:
    return max(1, math.ceil(x))


def sample_duration(rng: np.random.Generator, mean: float | Fraction) -> int:
    """One exponential draw with the given mean, rounded up to whole epochs."""
    if mean <= 0:
        raise ParameterError(f"mean must be positive, got {mean}")
    return discretize_duration(float(rng.exponential(float(mean))))


def expected_duration(mean: float | Fraction, tol: float = 1e-15) -> float:
    """E[max(1, ceil(X))] for X ~ Exponential(mean), summed from the tail P(X > n)."""
    ratio = math.exp(-1.0 / float(mean))
    total, term = 0.0, 1.0
    while term > tol:
        total += term
        term *= ratio
    return total


def generate(config: GeneratorConfig) -> Instance:
    """Build an instance; per job the draws are template, arrival, then durations."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    fleet = make_fleet(config.fleet_kind, config.n_machines)
    machine_ids = frozenset(m.id for m in fleet)
    choices = templates_for(config.k_tasks)

    jobs = []
    for j in range(config.n_jobs):
        template = choices[int(rng.integers(len(choices)))]
        arrival = int(rng.integers(config.arrival_window_epochs))
        tasks = tuple(
            Task(j, i, sample_duration(rng, config.duration_mean_epochs), machine_ids)
            for i in range(config.k_tasks)
        )
        jobs.append(Job(j, arrival, tasks, instantiate_template(template, config.k_tasks)))

    return Instance(tuple(jobs), tuple(fleet), name=f"seed-{config.seed}")
