"""Device and system power under the linear power profile."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Mapping

from .profiles import DeviceKind, DeviceProfile
from .topology import Topology, traffic_devices

K = DeviceKind


class CapacityExceededError(ValueError):
    pass


class InconsistentAssignmentError(ValueError):
    pass


def linear_power(profile: DeviceProfile, load: float) -> float:
    """Raw linear profile: idle plus load times marginal efficiency."""
    if load < 0:
        raise ValueError("load must be non-negative")
    if load > profile.capacity:
        raise CapacityExceededError(
            f"{profile.kind.value}: load {load} exceeds capacity {profile.capacity}"
        )
    if load == profile.capacity:
        return profile.p_max
    return profile.p_idle + load * profile.marginal


def device_power(
    profile: DeviceProfile,
    carried: float,
    activated: bool,
    *,
    check_capacity: bool = True,
) -> float:
    """Facility-level watts attributed to one device.

    The idle share (``idle_fraction``) is charged only when ``activated``;
    VN processors never pay idle, VW adapters pay their full idle.
    """
    if carried < 0:
        raise ValueError("carried load must be non-negative")
    # relative slack absorbs LP round-off at a saturated device
    if check_capacity and carried > profile.capacity * (1 + 1e-9):
        raise CapacityExceededError(
            f"{profile.kind.value}: load {carried} exceeds capacity {profile.capacity}"
        )
    idle = profile.charged_idle if activated else 0.0
    return idle + profile.pue * carried * profile.marginal


@dataclass
class PowerBreakdown:
    tpc_cc: float = 0.0
    tpc_mf: float = 0.0
    tpc_lf: float = 0.0
    tpc_nf: float = 0.0
    tpc_vn: float = 0.0
    tpc_rr: float = 0.0
    tpc_mr: float = 0.0
    tpc_ms: float = 0.0
    tpc_o: float = 0.0
    tpc_u: float = 0.0
    tpc_a: float = 0.0

    @property
    def tpc_net(self) -> float:
        return self.tpc_rr + self.tpc_mr + self.tpc_ms + self.tpc_o + self.tpc_u + self.tpc_a

    @property
    def total(self) -> float:
        return (
            self.tpc_cc + self.tpc_mf + self.tpc_lf + self.tpc_nf + self.tpc_vn
            + self.tpc_net
        )

    def as_dict(self) -> dict[str, float]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["tpc_net"] = self.tpc_net
        out["total"] = self.total
        return out


# which breakdown bucket each kind's power lands in
_BUCKET = {
    K.CC: "tpc_cc", K.CR: "tpc_cc", K.CS: "tpc_cc",
    K.MF: "tpc_mf", K.MFR: "tpc_mf", K.MFS: "tpc_mf",
    K.LF: "tpc_lf", K.LFR: "tpc_lf", K.LFS: "tpc_lf",
    K.NF: "tpc_nf",
    K.VN: "tpc_vn", K.VW: "tpc_vn",
    K.RR: "tpc_rr", K.MR: "tpc_mr", K.MS: "tpc_ms",
    K.OLT: "tpc_o", K.ONU: "tpc_u", K.AP: "tpc_a",
}


@dataclass
class LoadAssignment:
    """Per-processor workload (MIPS) and per-device traffic (Mb/s)."""

    pn_load: dict[str, float] = field(default_factory=dict)
    traffic: dict[str, float] = field(default_factory=dict)
    pn_active: dict[str, bool] = field(default_factory=dict)
    device_active: dict[str, bool] = field(default_factory=dict)

    @classmethod
    def from_allocation(
        cls,
        topology: Topology,
        tasks,
        allocation: Mapping[tuple, float],
    ) -> "LoadAssignment":
        """Aggregate ``{(task_id, pn): mips}`` along each task's route."""
        by_id = {t.id: t for t in tasks}
        pn_load: dict[str, float] = {}
        traffic: dict[str, float] = {}
        for (task_id, pn), x in allocation.items():
            if x <= 0:
                continue
            task = by_id[task_id]
            pn_load[pn] = pn_load.get(pn, 0.0) + x
            route = topology.path(task.cluster, pn)
            for dev in traffic_devices(topology, route):
                traffic[dev] = traffic.get(dev, 0.0) + task.drr * x
        return cls(
            pn_load=pn_load,
            traffic=traffic,
            pn_active={d: v > 0 for d, v in pn_load.items()},
            device_active={d: v > 0 for d, v in traffic.items()},
        )


def total_power(topology: Topology, assignment: LoadAssignment) -> PowerBreakdown:
    """Sum device power over every loaded or activated device.

    AP traffic is not capacity-checked: only VN-bound AP traffic is bounded
    by the AP's wireless capacity, and that is the optimiser's job.
    """
    out = PowerBreakdown()
    groups = (
        (assignment.pn_load, assignment.pn_active, True),
        (assignment.traffic, assignment.device_active, False),
    )
    for loads, flags, processors in groups:
        for dev in sorted(set(loads) | set(flags)):
            kind = topology.kind(dev)
            if kind.is_processor != processors:
                raise InconsistentAssignmentError(f"{dev} is in the wrong load table")
            load = loads.get(dev, 0.0)
            active = flags.get(dev, load > 0)
            if active != (load > 0):
                raise InconsistentAssignmentError(
                    f"{dev}: activation flag {active} contradicts load {load}"
                )
            watts = device_power(
                topology.profiles[kind], load, active,
                check_capacity=kind is not K.AP,
            )
            bucket = _BUCKET[kind]
            setattr(out, bucket, getattr(out, bucket) + watts)
    return out
