import itertools

import numpy as np
import pytest

from cloudfogvec.milp import build_model
from cloudfogvec.solver import (
    STATUS_GAP_LIMIT, STATUS_INFEASIBLE, STATUS_OPTIMAL, SizeLimitError, Solution,
    brute_force, grid_slack_bound, solve, verify,
)
from cloudfogvec.topology import build_one_zone
from cloudfogvec.workload import Task

from conftest import solve_point

TOPO = build_one_zone(2, 1, 1)  # CC1, MF, LF, NF1, VN1.1, VN2.1


def small_instances():
    """Deterministic family of instances with <= 2 tasks and <= 5 processors."""
    pns = TOPO.processing_nodes()
    masks = [m for k in (1, 2, 5) for m in itertools.combinations(pns, k)]
    masks = masks[::3]
    out = []
    for i, mask in enumerate(masks):
        drr = (0.001, 0.04)[i % 2]
        if i % 3 == 0:
            tasks = [Task(1, 1, 1 + i % 2, (1500, 3000, 7000)[(i // 3) % 3], drr, 1)]
        elif i % 3 == 1:
            tasks = [Task(1, 1, 1, 1200, drr, 1), Task(2, 1, 2, 2500, drr, 1)]
        else:
            tasks = [Task(1, 1, 1, 900, drr, None), Task(2, 1, 2, 1400, drr, None)]
        out.append((mask, tasks))
    return out


@pytest.mark.parametrize("mask,tasks", small_instances())
def test_oracle_agreement(mask, tasks):
    m = build_model(TOPO, tasks, mask)
    sol = solve(m)
    oracle = brute_force(m, grid_step=100)
    assert (sol.status == STATUS_OPTIMAL) == (oracle.status == STATUS_OPTIMAL)
    if sol.status != STATUS_OPTIMAL:
        return
    assert sol.objective <= oracle.objective + 1e-9
    assert oracle.objective - sol.objective <= grid_slack_bound(m, 100) + 1e-9
    assert verify(sol, m).ok()


def test_nf_versus_vn():
    m = build_model(TOPO, [Task(1, 1, 1, 2000, 0.001)], ["NF1", "VN1.1"])
    sol, oracle = solve(m), brute_force(m)
    assert set(pn for _, pn in sol.allocation) == {"VN1.1"}
    assert set(pn for _, pn in oracle.allocation) == {"VN1.1"}
    assert sol.objective == pytest.approx(oracle.objective, rel=1e-9)


def test_infeasible():
    m = build_model(TOPO, [Task(1, 1, 1, 7000, 0.001)], ["NF1"])
    assert solve(m).status == STATUS_INFEASIBLE
    assert brute_force(m).status == STATUS_INFEASIBLE


def test_forced_allocation():
    m = build_model(TOPO, [Task(1, 1, 1, 1000, 0.001)], ["LF"])
    sol = solve(m)
    assert sol.allocation == {(1, "LF"): pytest.approx(1000.0)}


def test_injected_capacity_violation():
    m = build_model(TOPO, [Task(1, 1, 1, 6001, 0.001, None)], ["NF1", "LF"])
    values = np.zeros(m.n_vars)
    values[m.x[(1, "NF1")]] = 6001
    values[m.d_sd[(1, "NF1")]] = 1
    values[m.d_d["NF1"]] = 1
    for dev in ("AP1", "ONU1"):
        values[m.psi[dev]] = 1
    rep = verify(Solution(STATUS_OPTIMAL, values=values), m)
    assert rep.residuals["C33"] == pytest.approx(1.0)
    assert not rep.ok()


def test_brute_force_size_limit():
    tasks = [Task(i, 1, 1, 1000, 0.001) for i in (1, 2, 3, 4)]
    with pytest.raises(SizeLimitError):
        brute_force(build_model(TOPO, tasks, ["NF1"]))


def test_relaxation_ordering():
    sol, m = solve_point(3000, pattern="one-task-each-cluster", case="CFVA-L")
    hand = Solution.from_allocation(m, {(t.id, "LF"): 3000.0 for t in m.tasks})
    assert sol.root_bound <= sol.objective + 1e-9
    assert sol.objective <= hand.objective + 1e-9


def test_verify_on_solve_output():
    sol, m = solve_point(2000, pattern="five-tasks-one-cluster", case="CFVA-L", strategy="DA")
    rep = verify(sol, m)
    assert rep.max_residual <= 1e-6
    assert rep.objective_delta <= 1e-9


@pytest.mark.parametrize("omega", [1000, 4000, 7000])
def test_da_not_worse_than_sa(omega):
    sa, _ = solve_point(omega, case="CFVA-L", strategy="SA")
    da, _ = solve_point(omega, case="CFVA-L", strategy="DA")
    assert da.objective <= sa.objective * (1 + 1e-9)


@pytest.mark.parametrize("omega", [2000, 6000])
def test_availability_monotone(omega):
    vals = [solve_point(omega, pattern="one-task-each-cluster", case=c)[0].objective
            for c in ("CFVA-H", "CFVA-L", "CFA", "CCA")]
    assert vals == sorted(vals)


def test_vn_symmetry():
    a = solve(build_model(TOPO, [Task(1, 1, 1, 2000, 0.001)], ["VN1.1", "NF1"]))
    topo = build_one_zone(2, 2, 1)
    b = solve(build_model(topo, [Task(1, 1, 1, 2000, 0.001)], ["VN1.2", "NF1"]))
    assert a.objective == pytest.approx(b.objective, rel=1e-12)


def test_deterministic():
    a, _ = solve_point(3000, pattern="one-task-each-cluster", case="CFVA-L", strategy="DA")
    b, _ = solve_point(3000, pattern="one-task-each-cluster", case="CFVA-L", strategy="DA")
    assert np.array_equal(a.values, b.values)


def test_internal_lp_gives_same_optimum():
    tasks = [Task(1, 1, 1, 2500, 0.001), Task(2, 1, 2, 1500, 0.001)]
    m = build_model(TOPO, tasks, TOPO.processing_nodes())
    a = solve(m, lp_method="highs")
    b = solve(m, lp_method="simplex")
    assert b.objective == pytest.approx(a.objective, rel=1e-9)


def test_time_limit_reports_gap_limit():
    sol, _ = solve_point(5000, pattern="five-tasks-each-cluster", case="CFVA-L",
                         strategy="DA")
    m = build_model(*_mask_and_tasks())
    limited = solve(m, node_limit=2)
    assert limited.status in (STATUS_GAP_LIMIT, STATUS_OPTIMAL)
    if limited.status == STATUS_GAP_LIMIT and limited.feasible:
        assert limited.objective >= sol.objective - 1e-9
        assert limited.gap > 0


def _mask_and_tasks():
    from cloudfogvec.workload import Scenario, make_scenario
    sc = Scenario(pattern="five-tasks-each-cluster", case="CFVA-L", strategy="DA",
                  demands=(5000,))
    topo = sc.topology()
    mask, tasks = make_scenario(sc, topology=topo)
    return topo, tasks, mask


def test_polished_solution_has_no_stray_workload():
    sol, m = solve_point(7000, case="CFVA-L", strategy="DA")
    for key, used in sol.task_uses.items():
        if not used:
            assert key not in sol.allocation


def test_matches_external_milp_where_vns_lose_to_the_cloud():
    # 20 splittable tasks; every VN looks free to the relaxation, yet the
    # optimum opens two cloud servers and no vehicle at all
    from scipy.optimize import Bounds, LinearConstraint, milp

    from cloudfogvec.milp import export_model, read_lp

    sol, m = solve_point(10000, architecture="multi-zone", pattern="five-tasks-each-cluster",
                         case="CFVA-H", strategy="DA")
    c, a, lo, hi, lb, ub, integrality = read_lp(export_model(m, "lp")).arrays()
    ref = milp(c, constraints=LinearConstraint(a, lo, hi), bounds=Bounds(lb, ub),
               integrality=integrality, options={"mip_rel_gap": 1e-9})
    assert sol.status == STATUS_OPTIMAL
    assert sol.objective == pytest.approx(ref.fun + m.constant, rel=1e-7)
    assert sol.tier_alloc(m.topology)["VN"] == 0
