import pytest
from hypothesis import given, settings, strategies as st

from cloudfogvec.power import (
    CapacityExceededError, InconsistentAssignmentError, LoadAssignment, PowerBreakdown,
    device_power, linear_power, total_power,
)
from cloudfogvec.profiles import DeviceKind as K, default_profiles
from cloudfogvec.topology import build_one_zone
from cloudfogvec.workload import Task

PROF = default_profiles()


def test_cc_endpoints():
    cc = PROF[K.CC]
    assert linear_power(cc, 144_000) == 115.0
    assert linear_power(cc, 0) == 69.0


def test_nf_midpoint():
    assert linear_power(PROF[K.NF], 3000) == pytest.approx(12.0, rel=1e-12)


@pytest.mark.parametrize("kind", list(PROF))
def test_linear_endpoints_exact(kind):
    p = PROF[kind]
    assert linear_power(p, 0) == p.p_idle
    assert linear_power(p, p.capacity) == p.p_max


def test_capacity_exceeded():
    with pytest.raises(CapacityExceededError):
        linear_power(PROF[K.NF], 6001)
    with pytest.raises(CapacityExceededError):
        device_power(PROF[K.NF], 6001, True)


def test_olt_device_power():
    # 4 Mb/s is 0.004 Gb/s on a 1920 Gb/s device
    expected = 1.5 * (0.06 * 45 + 0.004 * (50 - 45) / 1920)
    assert device_power(PROF[K.OLT], 4.0, True) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(4.05, abs=1e-4)


def test_vn_has_no_idle():
    assert device_power(PROF[K.VN], 3200, True) == pytest.approx(4.0, rel=1e-12)
    assert device_power(PROF[K.VN], 0, True) == 0.0


def test_vw_and_ap_idle():
    total = 4 * device_power(PROF[K.VW], 0, True) + 2 * device_power(PROF[K.AP], 0, True)
    assert total == pytest.approx(15.6, rel=1e-9)


def test_raw_idle_identities():
    assert PROF[K.MF].p_idle + PROF[K.LF].p_idle == pytest.approx(102.0, rel=1e-9)
    assert linear_power(PROF[K.CC], 0) == pytest.approx(69.0, rel=1e-9)


def test_empty_assignment():
    topo = build_one_zone(4, 2, 5)
    b = total_power(topo, LoadAssignment())
    assert b.total == 0.0
    assert all(v == 0.0 for v in b.as_dict().values())


def test_inconsistent_flags():
    topo = build_one_zone(1, 0, 1)
    a = LoadAssignment(pn_load={"NF1": 100.0}, pn_active={"NF1": False})
    with pytest.raises(InconsistentAssignmentError):
        total_power(topo, a)
    a = LoadAssignment(device_active={"ONU1": True})
    with pytest.raises(InconsistentAssignmentError):
        total_power(topo, a)


def test_breakdown_sums():
    topo = build_one_zone(4, 2, 5)
    tasks = [Task(1, 1, 1, 2000, 0.001), Task(2, 1, 2, 3000, 0.001)]
    alloc = {(1, "LF"): 2000.0, (2, "CC1"): 1000.0, (2, "VN2.1"): 2000.0}
    b = total_power(topo, LoadAssignment.from_allocation(topo, tasks, alloc))
    assert b.tpc_net == pytest.approx(b.tpc_rr + b.tpc_mr + b.tpc_ms + b.tpc_o + b.tpc_u + b.tpc_a)
    assert b.total == pytest.approx(
        b.tpc_cc + b.tpc_mf + b.tpc_lf + b.tpc_nf + b.tpc_vn + b.tpc_net, rel=1e-12)
    assert all(v >= 0 for v in b.as_dict().values())
    # hand sum of the VN branch: VN marginal + VW idle and marginal
    vn = 2000 * 4 / 3200 + 1.5 + 2.0 * 1 / 72.2
    assert b.tpc_vn == pytest.approx(vn, rel=1e-12)


_topo = build_one_zone(2, 1, 2)
_pns = _topo.processing_nodes()


@st.composite
def allocations(draw):
    tasks = [Task(i, 1, c, 1000.0, 0.001) for i, c in ((1, 1), (2, 2))]
    alloc = {}
    for t in tasks:
        pn = draw(st.sampled_from(_pns))
        alloc[(t.id, pn)] = draw(st.floats(1.0, 1000.0))
    return tasks, alloc


@settings(max_examples=60, deadline=None)
@given(allocations(), st.floats(0.1, 500.0))
def test_monotone_in_load(case, extra):
    tasks, alloc = case
    key = next(iter(alloc))
    base = total_power(_topo, LoadAssignment.from_allocation(_topo, tasks, alloc)).total
    bumped = dict(alloc)
    bumped[key] += extra
    if bumped[key] > _topo.profile(key[1]).capacity:
        return
    more = total_power(_topo, LoadAssignment.from_allocation(_topo, tasks, bumped)).total
    assert more >= base


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 6000.0), st.floats(1.0, 3200.0))
def test_additive_over_disjoint_devices(nf_load, vn_load):
    topo = build_one_zone(1, 1, 1)
    a = LoadAssignment(pn_load={"NF1": nf_load}, traffic={"ONU1": 1.0})
    b = LoadAssignment(pn_load={"VN1.1": vn_load}, traffic={"VW1.1": 2.0})
    both = LoadAssignment(
        pn_load={**a.pn_load, **b.pn_load}, traffic={**a.traffic, **b.traffic})
    lhs = total_power(topo, both).total
    rhs = total_power(topo, a).total + total_power(topo, b).total
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_breakdown_default_is_zero():
    assert PowerBreakdown().total == 0.0
