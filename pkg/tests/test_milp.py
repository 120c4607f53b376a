import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp

from cloudfogvec.milp import MODEL_LABELS, build_model, export_model, mps_name_table, read_lp, read_mps
from cloudfogvec.power import LoadAssignment, total_power
from cloudfogvec.profiles import DeviceKind as K
from cloudfogvec.solver import solve
from cloudfogvec.topology import build_one_zone
from cloudfogvec.workload import Scenario, Task, make_scenario


def model_for(omega, **fields):
    sc = Scenario(demands=(omega,), **fields)
    topo = sc.topology()
    mask, tasks = make_scenario(sc, topology=topo)
    return build_model(topo, tasks, mask)


def test_cca_single_task_structure():
    m = model_for(1000, case="CCA")
    assert len(m.x) == 5
    c24 = [c for c in m.constraints if c.label == "C24"]
    assert len(c24) == 1 and c24[0].rhs == 1000 and c24[0].sense == "="


@pytest.mark.parametrize("pattern,case", [
    ("one-task-one-cluster", "CFVA-L"), ("five-tasks-one-cluster", "CFA"),
    ("one-task-each-cluster", "CCA")])
def test_variable_count(pattern, case):
    m = model_for(2000, pattern=pattern, case=case)
    s, pn = len(m.tasks), len(m.pns)
    assert m.n_vars == s * pn + s * pn + pn + len(m.psi)
    assert sum(m.integer) == s * pn + pn + len(m.psi)


def test_big_m_values():
    m = model_for(3000, pattern="five-tasks-one-cluster", case="CFA", drr=0.01)
    assert m.big_m["M1"] == {t.id: 3000 for t in m.tasks}
    assert m.big_m["M2"] == 5
    assert m.big_m["M3"] == pytest.approx(5 * 30.0)


def test_label_completeness():
    sa = model_for(1000, case="CFVA-L", strategy="SA")
    da = model_for(1000, case="CFVA-L", strategy="DA")
    assert set(MODEL_LABELS) <= sa.labels()
    assert set(MODEL_LABELS) - {"C36"} <= da.labels()
    assert "C36" not in da.labels()


def test_ap_to_vw_link_blocks_vec():
    m = model_for(1000, case="CFVA-L", drr=0.08)
    rows = {c.name: c for c in m.constraints if c.label == "C34"}
    row = rows["C34_AP1_VW1.1"]
    assert row.rhs == pytest.approx(72.2)
    assert row.coef == (0.08,)
    sol = solve(m)
    vn = [d for d in m.pns if m.topology.kind(d) is K.VN]
    assert all(not sol.task_uses[(1, d)] for d in vn)
    assert sol.tier_alloc(m.topology)["VN"] == 0.0


def test_cc_activation_coefficient():
    m = model_for(1000, pattern="five-tasks-each-cluster", case="CCA")
    assert len(m.tasks) == 20
    for d in m.pns:
        assert m.cost[m.d_d[d]] == pytest.approx(69 * 1.1, rel=1e-12)


def test_objective_equals_total_power():
    m = model_for(2000, pattern="one-task-each-cluster", case="CFVA-L", strategy="DA")
    alloc = {(1, "VN1.1"): 1500.0, (1, "NF1"): 500.0, (2, "LF"): 2000.0,
             (3, "CC2"): 2000.0, (4, "VN2.2"): 2000.0}
    values = np.zeros(m.n_vars)
    for key, x in alloc.items():
        values[m.x[key]] = x
        values[m.d_sd[key]] = 1
        values[m.d_d[key[1]]] = 1
    for dev, expr in m.traffic_expr.items():
        values[m.psi[dev]] = float(any(values[i] > 0 for i in expr))
    expected = total_power(m.topology, LoadAssignment.from_allocation(m.topology, m.tasks, alloc))
    assert m.objective(values) == pytest.approx(expected.total, rel=1e-9)


def _rows_by_name(m):
    return {
        c.name: ({m.names[i]: v for i, v in zip(c.index, c.coef)}, c.sense, c.rhs)
        for c in m.constraints
    }


def _assert_round_trip(m, parsed):
    assert sorted(parsed.names) == sorted(m.names)
    assert {k: v for k, v in parsed.cost.items() if v} == {
        n: c for n, c in zip(m.names, m.cost) if c}
    want = _rows_by_name(m)
    got = {name: (t, s, r) for name, t, s, r in parsed.rows}
    assert got.keys() == want.keys()
    for name, (terms, sense, rhs) in want.items():
        gt, gs, gr = got[name]
        assert gs == sense and gr == rhs and gt == terms
    assert parsed.integer == {n for n, i in zip(m.names, m.integer) if i}
    for n, lo, hi in zip(m.names, m.lb, m.ub):
        assert parsed.lb.get(n, 0.0) == lo and parsed.ub.get(n, np.inf) == hi


def test_lp_round_trip():
    m = model_for(2000, pattern="one-task-each-cluster", case="CFVA-L", drr=0.02)
    _assert_round_trip(m, read_lp(export_model(m, "lp")))


def test_mps_round_trip():
    m = model_for(2000, pattern="one-task-each-cluster", case="CFVA-L", drr=0.02)
    text = export_model(m, "mps")
    table = mps_name_table(m)
    assert all(len(short) <= 8 for short in table.values())
    assert len(set(table.values())) == len(table)
    body = [l for l in text.splitlines() if not l.startswith("*")]
    assert not any("X_s1" in l for l in body)
    _assert_round_trip(m, read_mps(text))
    assert export_model(m, "mps") == text


def test_export_names_deterministic():
    a = export_model(model_for(1000, case="CFA"), "lp")
    assert a == export_model(model_for(1000, case="CFA"), "lp")
    assert "X_s1_dNF1" in a and "A_dLF" in a and "P_iONU1" in a


@pytest.mark.parametrize("fmt", ["lp", "mps"])
def test_external_solver_on_export(fmt):
    m = model_for(2000, pattern="five-tasks-one-cluster", case="CFA")
    parsed = (read_lp if fmt == "lp" else read_mps)(export_model(m, fmt))
    c, a, lo, hi, lb, ub, integrality = parsed.arrays()
    res = milp(c, constraints=LinearConstraint(a, lo, hi), bounds=Bounds(lb, ub),
               integrality=integrality)
    assert res.status == 0
    assert res.fun + parsed.constant == pytest.approx(129.0, rel=0.03)
    assert res.fun + parsed.constant == pytest.approx(solve(m).objective, rel=1e-6)


def test_empty_task_list():
    topo = build_one_zone(1, 0, 1)
    m = build_model(topo, [], topo.processing_nodes())
    assert m.objective(np.zeros(m.n_vars)) == 0.0
    sol = solve(m)
    assert sol.status == "optimal" and sol.objective == 0.0


def test_empty_mask_rejected():
    topo = build_one_zone(1, 0, 1)
    with pytest.raises(ValueError):
        build_model(topo, [Task(1, 1, 1, 1000, 0.001)], [])
