"""Cloud / fog / vehicular-edge tree topology and its unique routing paths."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .profiles import DeviceKind, DeviceProfile, default_profiles

K = DeviceKind
_KIND_ORDER = {kind: i for i, kind in enumerate(DeviceKind)}

ONE_ZONE = "one-zone"
MULTI_ZONE = "multi-zone"


class UnknownNodeError(KeyError):
    pass


@dataclass(frozen=True, order=True)
class Device:
    zone: int
    cluster: int
    kind_rank: int
    index: int
    id: str = field(compare=False)
    kind: DeviceKind = field(compare=False)


def _device(kind: DeviceKind, zone=0, cluster=0, index=0, name=None) -> Device:
    return Device(zone, cluster, _KIND_ORDER[kind], index, name or kind.value, kind)


@dataclass(frozen=True, eq=False)
class Topology:
    """Immutable device tree.

    Shared infrastructure (OLT, metro, core, cloud) sits in zone 0 / cluster 0.
    Clusters are numbered globally from 1; cluster ``c`` lives in zone
    ``(c - 1) // clusters_per_zone + 1``.
    """

    architecture: str
    zones: int
    clusters_per_zone: int
    vns_per_cluster: int
    cc_servers: int
    rr_hops: int
    devices: tuple[Device, ...]
    links: tuple[tuple[str, str, float], ...]
    profiles: Mapping[DeviceKind, DeviceProfile]
    _by_id: dict = field(repr=False, default_factory=dict)
    _adj: dict = field(repr=False, default_factory=dict)
    _cap: dict = field(repr=False, default_factory=dict)
    _parent: dict = field(repr=False, default_factory=dict)
    _depth: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        self._by_id.update({d.id: d for d in self.devices})
        if len(self._by_id) != len(self.devices):
            raise ValueError("duplicate device ids")
        for d in self._by_id:
            self._adj[d] = []
        for a, b, cap in self.links:
            self._cap[(a, b)] = cap
            if b not in self._adj[a]:
                self._adj[a].append(b)
        self._validate_tree()
        # root the routing tree at the OLT for lowest-common-ancestor paths
        root = "OLT"
        self._parent[root] = None
        self._depth[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if v not in self._depth:
                    self._parent[v] = u
                    self._depth[v] = self._depth[u] + 1
                    queue.append(v)

    def _validate_tree(self):
        edges = {frozenset((a, b)) for a, b, _ in self.links}
        for a, b, _ in self.links:
            if (b, a) not in self._cap:
                raise ValueError(f"link {a}-{b} lacks its reverse direction")
        if len(edges) != len(self.devices) - 1:
            raise ValueError("device graph is not a tree")
        seen = {self.devices[0].id}
        queue = deque(seen)
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        if len(seen) != len(self.devices):
            raise ValueError("device graph is not connected")

    # lookups

    @property
    def n_clusters(self) -> int:
        return self.zones * self.clusters_per_zone

    def clusters(self) -> range:
        return range(1, self.n_clusters + 1)

    def zone_of_cluster(self, cluster: int) -> int:
        if not 1 <= cluster <= self.n_clusters:
            raise UnknownNodeError(f"no cluster {cluster}")
        return (cluster - 1) // self.clusters_per_zone + 1

    def device(self, device_id: str) -> Device:
        try:
            return self._by_id[device_id]
        except KeyError:
            raise UnknownNodeError(device_id) from None

    def kind(self, device_id: str) -> DeviceKind:
        return self.device(device_id).kind

    def profile(self, device_id: str) -> DeviceProfile:
        return self.profiles[self.kind(device_id)]

    def __contains__(self, device_id: str) -> bool:
        return device_id in self._by_id

    def of_kind(self, *kinds: DeviceKind) -> list[str]:
        return [d.id for d in self.devices if d.kind in kinds]

    def processing_nodes(self) -> list[str]:
        return [d.id for d in self.devices if d.kind.is_processor]

    def ap(self, cluster: int) -> str:
        self.zone_of_cluster(cluster)
        return f"AP{cluster}"

    def vns(self, cluster: int) -> list[str]:
        return [
            d.id for d in self.devices if d.kind is K.VN and d.cluster == cluster
        ]

    def neighbors(self, device_id: str) -> list[str]:
        return list(self._adj[self.device(device_id).id])

    def link_capacity(self, a: str, b: str) -> float:
        return self._cap[(a, b)]

    # routing

    def path(self, source_cluster: int, pn: str) -> tuple[str, ...]:
        """Device sequence carrying traffic from a cluster's AP to ``pn``."""
        dev = self.device(pn)
        if not dev.kind.is_processor:
            raise UnknownNodeError(f"{pn} is not a processing node")
        return self.route(self.ap(source_cluster), pn)

    def route(self, a: str, b: str) -> tuple[str, ...]:
        self.device(a), self.device(b)
        up, down = [a], [b]
        while up[-1] != down[-1]:
            if self._depth[up[-1]] >= self._depth[down[-1]]:
                up.append(self._parent[up[-1]])
            else:
                down.append(self._parent[down[-1]])
        return tuple(up + down[-2::-1])

    def canonical(self) -> list[tuple[str, str, int, int]]:
        return [(d.id, d.kind.value, d.zone, d.cluster) for d in self.devices]


def _downstream_capacity(profiles, a: Device, b: Device) -> float:
    if b.kind is K.SN or a.kind is K.SN:
        return math.inf
    if b.kind.is_processor:
        return profiles[a.kind].capacity
    return profiles[b.kind].capacity


def _assemble(
    architecture: str,
    zones: int,
    clusters_per_zone: int,
    vns_per_cluster: int,
    cc_servers: int,
    rr_hops: int,
    profiles: Mapping[DeviceKind, DeviceProfile] | None,
    with_nf: bool = True,
) -> Topology:
    if zones < 1 or clusters_per_zone < 1:
        raise ValueError("need at least one zone and one cluster per zone")
    if vns_per_cluster < 0:
        raise ValueError("vns_per_cluster must be >= 0")
    if cc_servers < 1:
        raise ValueError("need at least one cloud server")
    if rr_hops < 1:
        raise ValueError("rr_hops must be >= 1")
    profiles = dict(profiles or default_profiles())

    devices: list[Device] = []
    edges: list[tuple[Device, Device]] = []

    def add(dev):
        devices.append(dev)
        return dev

    olt = add(_device(K.OLT))
    lfr = add(_device(K.LFR))
    lfs = add(_device(K.LFS))
    lf = add(_device(K.LF))
    ms = add(_device(K.MS))
    mfr = add(_device(K.MFR))
    mfs = add(_device(K.MFS))
    mf = add(_device(K.MF))
    mr = add(_device(K.MR))
    edges += [(olt, lfr), (lfr, lfs), (lfs, lf)]
    edges += [(olt, ms), (ms, mfr), (mfr, mfs), (mfs, mf), (ms, mr)]
    prev = mr
    for k in range(1, rr_hops + 1):
        rr = add(_device(K.RR, index=k, name=f"RR{k}"))
        edges.append((prev, rr))
        prev = rr
    cr = add(_device(K.CR))
    cs = add(_device(K.CS))
    edges += [(prev, cr), (cr, cs)]
    for n in range(1, cc_servers + 1):
        edges.append((cs, add(_device(K.CC, index=n, name=f"CC{n}"))))

    cluster = 0
    for z in range(1, zones + 1):
        onu = add(_device(K.ONU, zone=z, name=f"ONU{z}"))
        edges.append((olt, onu))
        if with_nf:
            edges.append((onu, add(_device(K.NF, zone=z, name=f"NF{z}"))))
        for _ in range(clusters_per_zone):
            cluster += 1
            ap = add(_device(K.AP, z, cluster, name=f"AP{cluster}"))
            sn = add(_device(K.SN, z, cluster, name=f"SN{cluster}"))
            edges += [(onu, ap), (ap, sn)]
            for i in range(1, vns_per_cluster + 1):
                vw = add(_device(K.VW, z, cluster, i, f"VW{cluster}.{i}"))
                vn = add(_device(K.VN, z, cluster, i, f"VN{cluster}.{i}"))
                edges += [(ap, vw), (vw, vn)]

    links = []
    for a, b in edges:
        links.append((a.id, b.id, _downstream_capacity(profiles, a, b)))
        links.append((b.id, a.id, _downstream_capacity(profiles, b, a)))
    links.sort(key=lambda t: (t[0], t[1]))

    return Topology(
        architecture=architecture,
        zones=zones,
        clusters_per_zone=clusters_per_zone,
        vns_per_cluster=vns_per_cluster,
        cc_servers=cc_servers,
        rr_hops=rr_hops,
        devices=tuple(sorted(devices)),
        links=tuple(links),
        profiles=profiles,
    )


def build_one_zone(
    clusters: int,
    vns_per_cluster: int,
    cc_servers: int,
    *,
    rr_hops: int = 1,
    profiles: Mapping[DeviceKind, DeviceProfile] | None = None,
) -> Topology:
    """One ONU (with its NF) serving ``clusters`` access points."""
    return _assemble(
        ONE_ZONE, 1, clusters, vns_per_cluster, cc_servers, rr_hops, profiles
    )


def build_multi_zone(
    zones: int,
    clusters_per_zone: int,
    vns_per_cluster: int,
    cc_servers: int,
    *,
    rr_hops: int = 1,
    profiles: Mapping[DeviceKind, DeviceProfile] | None = None,
) -> Topology:
    """One ONU and NF per zone, all ONUs on the single OLT."""
    return _assemble(
        MULTI_ZONE, zones, clusters_per_zone, vns_per_cluster, cc_servers,
        rr_hops, profiles,
    )


def build(
    architecture: str,
    *,
    zones: int = 1,
    clusters_per_zone: int = 4,
    vns_per_cluster: int = 0,
    cc_servers: int = 5,
    rr_hops: int = 1,
    profiles: Mapping[DeviceKind, DeviceProfile] | None = None,
) -> Topology:
    if architecture == ONE_ZONE:
        if zones != 1:
            raise ValueError("one-zone architecture has exactly one zone")
        return build_one_zone(
            clusters_per_zone, vns_per_cluster, cc_servers,
            rr_hops=rr_hops, profiles=profiles,
        )
    if architecture == MULTI_ZONE:
        return build_multi_zone(
            zones, clusters_per_zone, vns_per_cluster, cc_servers,
            rr_hops=rr_hops, profiles=profiles,
        )
    raise ValueError(f"unknown architecture {architecture!r}")


def traffic_devices(topology: Topology, route: Iterable[str]) -> list[str]:
    """Power-charged network devices on a route (processors and SNs dropped)."""
    out = []
    for d in route:
        kind = topology.kind(d)
        if kind is K.SN or kind.is_processor:
            continue
        out.append(d)
    return out
