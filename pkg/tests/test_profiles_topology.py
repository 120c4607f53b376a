import itertools
from collections import Counter

import networkx as nx
import pytest

from cloudfogvec.profiles import DeviceKind as K, DeviceProfile, apply_overrides, default_profiles
from cloudfogvec.topology import (
    UnknownNodeError, build, build_multi_zone, build_one_zone, traffic_devices,
)

# efficiency column of the equipment tables: W/MIPS for processors, W/Gb/s otherwise
PUBLISHED = {
    K.CC: "0.00032", K.MF: "0.00039", K.LF: "0.00063", K.NF: "0.001", K.VN: "0.00125",
    K.RR: "1.595", K.MR: "0.063", K.MS: "0.028", K.OLT: "0.003", K.ONU: "0.150",
    K.AP: "5.313", K.CR: "0.063", K.CS: "0.077", K.MFR: "0.033", K.MFS: "0.123",
    K.LFR: "0.033", K.LFS: "0.123", K.VW: "13.850",
}


@pytest.mark.parametrize("kind", list(PUBLISHED))
def test_efficiency_matches_table(kind):
    p = default_profiles()[kind]
    value = p.marginal if kind.is_processor else p.marginal * 1000
    text = PUBLISHED[kind]
    decimals = len(text.split(".")[1])
    assert abs(value - float(text)) <= 0.5 * 10 ** -decimals + 1e-12


def test_idle_fraction_and_pue():
    prof = default_profiles()
    for k in (K.RR, K.MR, K.MS, K.OLT, K.CR, K.CS, K.MFR, K.MFS, K.LFR, K.LFS):
        assert prof[k].idle_fraction == 0.06
    for k in (K.ONU, K.AP, K.NF, K.VW, K.CC, K.MF, K.LF):
        assert prof[k].idle_fraction == 1.0
    expected = {K.CR: 1.1, K.CS: 1.1, K.CC: 1.1, K.MFR: 1.4, K.MFS: 1.4, K.MF: 1.4,
                K.LFR: 1.5, K.LFS: 1.5, K.LF: 1.5, K.RR: 1.5, K.MR: 1.5, K.MS: 1.5,
                K.OLT: 1.5, K.ONU: 1.0, K.AP: 1.0, K.NF: 1.0, K.VN: 1.0, K.VW: 1.0}
    for k, pue in expected.items():
        assert prof[k].pue == pue
    assert prof[K.VN].charged_idle == 0.0
    assert prof[K.VW].charged_idle == 1.5


def test_profile_validation():
    with pytest.raises(ValueError):
        DeviceProfile(K.NF, 10, 12, 100)
    with pytest.raises(ValueError):
        DeviceProfile(K.NF, 10, 5, 0)
    with pytest.raises(ValueError):
        apply_overrides(default_profiles(), {"NF": {"colour": 1}})
    assert apply_overrides(default_profiles(), {"NF": {"p_idle": 8}})[K.NF].p_idle == 8.0


def test_processor_kinds():
    assert {k for k in K if k.is_processor} == {K.CC, K.MF, K.LF, K.NF, K.VN}


@pytest.mark.parametrize("vns,total", [(2, 8), (15, 60)])
def test_vn_counts(vns, total):
    topo = build_one_zone(4, vns, 5)
    assert len(topo.of_kind(K.VN)) == total
    assert len(topo.of_kind(K.VW)) == total


def test_minimal_topology():
    topo = build_one_zone(1, 0, 1)
    assert topo.of_kind(K.VN) == []
    route = topo.path(1, "NF1")
    assert traffic_devices(topo, route) == ["AP1", "ONU1"]


def test_multi_zone_counts():
    topo = build_multi_zone(4, 1, 2, 5)
    counts = Counter(d.kind for d in topo.devices)
    assert counts[K.ONU] == counts[K.NF] == counts[K.AP] == 4
    assert counts[K.VN] == 8
    assert counts[K.OLT] == counts[K.MS] == counts[K.MR] == 1


def test_one_zone_equivalence():
    a = build_multi_zone(1, 4, 2, 5)
    b = build_one_zone(4, 2, 5)
    assert Counter((d.kind, d.zone, d.cluster) for d in a.devices) == Counter(
        (d.kind, d.zone, d.cluster) for d in b.devices
    )


def test_inter_zone_path():
    topo = build_multi_zone(2, 1, 0, 1)
    assert traffic_devices(topo, topo.path(1, "NF2")) == ["AP1", "ONU1", "OLT", "ONU2"]


def test_named_paths():
    topo = build_one_zone(4, 2, 5)
    assert topo.path(1, "NF1") == ("AP1", "ONU1", "NF1")
    assert topo.path(1, "LF") == ("AP1", "ONU1", "OLT", "LFR", "LFS", "LF")
    assert topo.path(1, "MF") == ("AP1", "ONU1", "OLT", "MS", "MFR", "MFS", "MF")
    assert topo.path(1, "CC3") == (
        "AP1", "ONU1", "OLT", "MS", "MR", "RR1", "CR", "CS", "CC3")
    assert topo.path(2, "VN2.1") == ("AP2", "VW2.1", "VN2.1")
    assert topo.path(1, "VN3.2") == ("AP1", "ONU1", "AP3", "VW3.2", "VN3.2")
    multi = build_multi_zone(4, 1, 2, 5)
    assert multi.path(1, "VN2.1") == (
        "AP1", "ONU1", "OLT", "ONU2", "AP2", "VW2.1", "VN2.1")


def test_rr_hops():
    topo = build_one_zone(1, 0, 1, rr_hops=3)
    assert topo.path(1, "CC1")[5:8] == ("RR1", "RR2", "RR3")


def test_unknown_node():
    topo = build_one_zone(1, 0, 1)
    with pytest.raises(UnknownNodeError):
        topo.path(1, "NF9")
    with pytest.raises(UnknownNodeError):
        topo.path(1, "ONU1")


def _graph(topo):
    g = nx.Graph()
    g.add_nodes_from(d.id for d in topo.devices)
    g.add_edges_from((a, b) for a, b, _ in topo.links)
    return g


@pytest.mark.parametrize("arch,zones,cpz", [("one-zone", 1, 3), ("multi-zone", 3, 2)])
def test_paths_match_graph_search(arch, zones, cpz):
    topo = build(arch, zones=zones, clusters_per_zone=cpz, vns_per_cluster=2,
                 cc_servers=2, rr_hops=2)
    g = _graph(topo)
    assert nx.is_tree(g)
    for c in topo.clusters():
        for pn in topo.processing_nodes():
            found = list(nx.all_simple_paths(g, topo.ap(c), pn))
            assert len(found) == 1
            assert tuple(found[0]) == topo.path(c, pn)


def test_vn_only_via_own_ap():
    topo = build_one_zone(3, 2, 1)
    for vn in topo.of_kind(K.VN):
        nbrs = topo.neighbors(vn)
        assert len(nbrs) == 1 and topo.kind(nbrs[0]) is K.VW
        ap = [n for n in topo.neighbors(nbrs[0]) if topo.kind(n) is K.AP]
        assert ap == [topo.ap(topo.device(vn).cluster)]


def test_link_capacities():
    topo = build_one_zone(1, 1, 1)
    assert topo.link_capacity("AP1", "VW1.1") == pytest.approx(72.2)
    assert topo.link_capacity("VW1.1", "VN1.1") == pytest.approx(72.2)
    assert topo.link_capacity("ONU1", "OLT") == pytest.approx(1920_000)


def test_vn_relabel_symmetry():
    topo = build_one_zone(2, 3, 1)
    multiset = sorted((d.kind.value, d.zone, d.cluster) for d in topo.devices)
    perm = {f"VN1.{i}": f"VN1.{j}" for i, j in zip((1, 2, 3), (3, 1, 2))}
    relabeled = sorted(
        (topo.kind(perm.get(d.id, d.id)).value, d.zone, d.cluster) for d in topo.devices)
    assert multiset == relabeled


@pytest.mark.parametrize("c,v,s,z", list(itertools.product((1, 2), (0, 2), (1, 3), (1, 2))))
def test_nesting(c, v, s, z):
    one = {d.kind for d in build_one_zone(c, v, s).devices}
    multi = {d.kind for d in build_multi_zone(z, c, v, s).devices}
    assert one <= multi


def test_canonical_order_stable():
    a = build_one_zone(2, 2, 2).canonical()
    b = build_one_zone(2, 2, 2).canonical()
    assert a == b
    assert [r[0] for r in a] == [d.id for d in build_one_zone(2, 2, 2).devices]
