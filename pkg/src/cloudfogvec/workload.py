"""Task generation and scenario definitions."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping, Sequence

from .profiles import DeviceKind, apply_overrides, default_profiles, mips_capacity
from .topology import MULTI_ZONE, ONE_ZONE, Topology, build

__all__ = [
    "Task", "Scenario", "traffic_for", "mips_capacity", "make_scenario",
    "availability_mask", "generate_tasks",
]

CASES = ("CCA", "CFA", "CFVA-L", "CFVA-H")
STRATEGIES = ("SA", "DA")
PATTERNS = (
    "one-task-one-cluster",
    "one-task-each-cluster",
    "five-tasks-one-cluster",
    "five-tasks-each-cluster",
)
VNS_PER_CASE = {"CCA": 0, "CFA": 0, "CFVA-L": 2, "CFVA-H": 15}

HIGH_DEMANDS = tuple(range(1000, 10001, 1000))
LOW_DEMANDS = tuple(range(100, 1001, 100))
# 0.02 is absent from the listed set but discussed in the results
DRR_VALUES = (0.001, 0.02, 0.04, 0.08, 0.1, 0.2, 0.4, 0.8)


def traffic_for(omega: float, drr: float) -> float:
    """Traffic (Mb/s) implied by a processing demand at a given data rate ratio."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    return drr * omega


@dataclass(frozen=True)
class Task:
    id: int
    zone: int
    cluster: int
    omega: float
    drr: float
    split_limit: int | None = 1

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.drr <= 0:
            raise ValueError("drr must be positive")
        if self.split_limit is not None and self.split_limit < 1:
            raise ValueError("split_limit must be >= 1")

    @property
    def flow(self) -> float:
        return traffic_for(self.omega, self.drr)


@dataclass(frozen=True)
class Scenario:
    architecture: str = ONE_ZONE
    pattern: str = "one-task-one-cluster"
    case: str = "CFA"
    strategy: str = "SA"
    demands: tuple[float, ...] = HIGH_DEMANDS
    drr: float = 0.001
    zones: int | None = None
    clusters_per_zone: int | None = None
    cc_servers: int = 5
    rr_hops: int = 1
    source_cluster: int = 1
    vns: int | None = None
    tau: float = 0.06
    overrides: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.architecture not in (ONE_ZONE, MULTI_ZONE):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}")
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.drr <= 0:
            raise ValueError("drr must be positive")
        object.__setattr__(self, "demands", tuple(self.demands))

    @property
    def layout(self) -> tuple[int, int]:
        """(zones, clusters per zone), defaulting to the four-cluster layouts."""
        if self.architecture == ONE_ZONE:
            return 1, self.clusters_per_zone or 4
        return self.zones or 4, self.clusters_per_zone or 1

    @property
    def vns_per_cluster(self) -> int:
        if self.vns is not None and self.case.startswith("CFVA"):
            return self.vns
        return VNS_PER_CASE[self.case]

    def profiles(self):
        return apply_overrides(default_profiles(self.tau), self.overrides)

    def topology(self) -> Topology:
        zones, cpz = self.layout
        return build(
            self.architecture,
            zones=zones,
            clusters_per_zone=cpz,
            vns_per_cluster=self.vns_per_cluster,
            cc_servers=self.cc_servers,
            rr_hops=self.rr_hops,
            profiles=self.profiles(),
        )

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["demands"] = list(self.demands)
        out["overrides"] = {k: dict(v) for k, v in self.overrides.items()}
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)


def availability_mask(topology: Topology, case: str) -> tuple[str, ...]:
    """Processing nodes a case may use, in canonical order."""
    K = DeviceKind
    if case == "CCA":
        allowed = {K.CC}
    elif case == "CFA":
        allowed = {K.CC, K.MF, K.LF, K.NF}
    elif case in ("CFVA-L", "CFVA-H"):
        allowed = {K.CC, K.MF, K.LF, K.NF, K.VN}
    else:
        raise ValueError(f"unknown case {case!r}")
    return tuple(d for d in topology.processing_nodes() if topology.kind(d) in allowed)


def generate_tasks(
    topology: Topology,
    pattern: str,
    omega: float,
    drr: float,
    strategy: str = "SA",
    source_cluster: int = 1,
) -> list[Task]:
    split = 1 if strategy == "SA" else None
    if pattern.startswith("one-task"):
        per_cluster = 1
    elif pattern.startswith("five-tasks"):
        per_cluster = 5
    else:
        raise ValueError(f"unknown pattern {pattern!r}")
    if pattern.endswith("one-cluster"):
        sources: Sequence[int] = [source_cluster] * per_cluster
    else:
        sources = [c for c in topology.clusters() for _ in range(per_cluster)]
    return [
        Task(i, topology.zone_of_cluster(c), c, float(omega), drr, split)
        for i, c in enumerate(sources, start=1)
    ]


def make_scenario(
    scenario: Scenario, omega: float | None = None, topology: Topology | None = None
) -> tuple[tuple[str, ...], list[Task]]:
    """Availability mask and task list for one demand point of a scenario."""
    if omega is None:
        if len(scenario.demands) != 1:
            raise ValueError("scenario sweeps several demands; pass omega")
        omega = scenario.demands[0]
    topology = topology or scenario.topology()
    mask = availability_mask(topology, scenario.case)
    tasks = generate_tasks(
        topology, scenario.pattern, omega, scenario.drr, scenario.strategy,
        scenario.source_cluster,
    )
    return mask, tasks
