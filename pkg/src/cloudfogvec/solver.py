"""Exact branch-and-bound for the placement model, a grid oracle and a verifier."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import INFEASIBLE, OPTIMAL, BoxLP
from .milp import EQ, GE, LE, MilpModel
from .power import LoadAssignment, PowerBreakdown, total_power
from .profiles import DeviceKind
from .topology import traffic_devices

log = logging.getLogger(__name__)

K = DeviceKind
STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_GAP_LIMIT = "gap-limit"

INT_TOL = 1e-6


class SizeLimitError(ValueError):
    pass


@dataclass
class Solution:
    status: str
    objective: float = math.nan
    allocation: dict = field(default_factory=dict)
    pn_active: dict = field(default_factory=dict)
    device_active: dict = field(default_factory=dict)
    task_uses: dict = field(default_factory=dict)
    breakdown: PowerBreakdown = field(default_factory=PowerBreakdown)
    vec_alloc: dict = field(default_factory=dict)
    gap: float = math.nan
    bound: float = math.nan
    root_bound: float = math.nan
    solve_time: float = 0.0
    nodes: int = 0
    values: np.ndarray | None = field(default=None, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status in (STATUS_OPTIMAL, STATUS_GAP_LIMIT) and self.values is not None

    def tier_alloc(self, topology) -> dict[str, float]:
        """Allocated MIPS per processor tier (CC, MF, LF, NF, VN)."""
        out = {k: 0.0 for k in ("CC", "MF", "LF", "NF", "VN")}
        for (_, pn), x in self.allocation.items():
            out[topology.kind(pn).value] += x
        return out

    @classmethod
    def from_values(
        cls, model: MilpModel, values, status=STATUS_OPTIMAL, strict=True, **kw
    ) -> "Solution":
        """Decode a variable vector. With ``strict`` off, loads that break the
        power model leave an empty breakdown for :func:`verify` to flag."""
        values = np.asarray(values, dtype=float)
        alloc = {key: float(values[i]) for key, i in model.x.items() if values[i] > 0}
        sol = cls(
            status=status,
            objective=model.objective(values),
            allocation=alloc,
            pn_active={d: values[i] > 0.5 for d, i in model.d_d.items()},
            device_active={d: values[i] > 0.5 for d, i in model.psi.items()},
            task_uses={k: values[i] > 0.5 for k, i in model.d_sd.items()},
            values=values,
            **kw,
        )
        assignment = LoadAssignment.from_allocation(model.topology, model.tasks, alloc)
        try:
            sol.breakdown = total_power(model.topology, assignment)
        except ValueError:
            if strict:
                raise
        topo = model.topology
        sol.vec_alloc = {c: 0.0 for c in topo.clusters()}
        for (_, pn), x in alloc.items():
            dev = topo.device(pn)
            if dev.kind is K.VN:
                sol.vec_alloc[dev.cluster] += x
        return sol

    @classmethod
    def from_allocation(cls, model: MilpModel, allocation, status=STATUS_OPTIMAL) -> "Solution":
        """Build a solution from ``{(task_id, pn): mips}``, deriving every binary."""
        values = np.zeros(model.n_vars)
        for key, x in allocation.items():
            values[model.x[key]] = x
            if x > 0:
                values[model.d_sd[key]] = 1.0
                values[model.d_d[key[1]]] = 1.0
        for dev, expr in model.traffic_expr.items():
            if any(values[i] > 0 for i in expr):
                values[model.psi[dev]] = 1.0
        return cls.from_values(model, values, status)


def _branch_priority(model: MilpModel) -> list[int]:
    topo = model.topology
    canon = {d.id: i for i, d in enumerate(topo.devices)}

    def pn_key(d):
        p = topo.profile(d)
        return (p.charged_idle / p.capacity, canon[d])

    order = [model.d_d[d] for d in sorted(model.pns, key=pn_key)]
    order += [model.psi[d] for d in model.psi]
    order += [model.d_sd[k] for k in model.d_sd]
    return order


def _idle_weights(model: MilpModel) -> np.ndarray:
    """Charged idle watts switched on by each activation binary; 0 elsewhere."""
    topo = model.topology
    w = np.zeros(model.n_vars)
    for d, i in model.d_d.items():
        w[i] = topo.profile(d).charged_idle
    for d, i in model.psi.items():
        w[i] = topo.profile(d).charged_idle
    return w


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)


class _Search:
    """Best-first branch and bound over the binaries of one model."""

    def __init__(self, model: MilpModel, lp_method: str, gap_tol: float):
        self.c, self.a_ub, self.b_ub, self.a_eq, self.b_eq, self.lb0, self.ub0 = model.arrays()
        self.bins = model.binary_indices()
        self.priority = np.asarray(_branch_priority(model), dtype=int)
        self.pool_of = {j: pool for pool in model.pools for j in pool}
        self.weight = _idle_weights(model)[self.priority]
        self.box = BoxLP(self.c, self.a_ub, self.b_ub, self.a_eq, self.b_eq, lp_method)
        self.gap_tol = gap_tol

    def lp(self, lb, ub):
        return self.box.solve(lb, ub)

    def pick(self, j, x):
        """Branch variable: ``j``, unless it sits in a pool of identical PNs.

        Pool members switch on in order, so the member at position
        ceil(sum) splits "at most k active" from "at least k + 1", which
        moves the bound far more than branching on the pool's first member.
        """
        pool = self.pool_of.get(j)
        if pool is None:
            return j
        k = math.ceil(float(np.sum(x[list(pool)])) - INT_TOL)
        for cand in pool[max(k - 1, 0):]:
            if INT_TOL < x[cand] < 1 - INT_TOL:
                return cand
        return j

    def abs_tol(self, v):
        return max(1e-9, self.gap_tol * abs(v))

    def run(self, lb0, ub0, *, deadline=math.inf, node_limit=None, cutoff=None):
        """Minimise over the box ``[lb0, ub0]``.

        With ``cutoff`` set, stop at the first integral point whose objective
        is at most ``cutoff`` (an existence check rather than an optimisation).
        Returns ``(x, value, open_bound, root, nodes, stopped_early)``.
        """
        bins, priority = self.bins, self.priority
        inc = {"val": math.inf, "x": None, "key": None}

        def offer(x, val):
            if cutoff is not None and val > cutoff:
                return
            key = tuple(np.round(x[bins]).astype(int))
            if val < inc["val"] - self.abs_tol(inc["val"] if math.isfinite(inc["val"]) else val):
                better = True
            else:
                better = abs(val - inc["val"]) <= self.abs_tol(val) and key < inc["key"]
            if better:
                inc.update(val=val, x=x.copy(), key=key)

        def found():
            return cutoff is not None and inc["x"] is not None and inc["val"] <= cutoff

        def prune(bound):
            if cutoff is not None:
                return bound > cutoff
            return math.isfinite(inc["val"]) and bound >= inc["val"] - self.abs_tol(inc["val"])

        def round_up(x, lb, ub):
            # fix every binary at the ceiling of its relaxed value, re-solve the LP
            flb, fub = lb.copy(), ub.copy()
            vals = np.clip(np.where(x[bins] > INT_TOL, 1.0, 0.0), lb[bins], ub[bins])
            flb[bins] = vals
            fub[bins] = vals
            res = self.lp(flb, fub)
            if res.status == OPTIMAL:
                offer(res.x, res.fun)

        root = self.lp(lb0, ub0)
        if root.status != OPTIMAL:
            return None, math.inf, math.inf, root, 1, False
        counter = itertools.count()
        heap = [_Node(root.fun, next(counter), lb0.copy(), ub0.copy())]
        cache = {heap[0].seq: root}
        nodes = 0
        stopped = False
        while heap and not found():
            if time.perf_counter() > deadline or (node_limit and nodes >= node_limit):
                stopped = True
                break
            node = heapq.heappop(heap)
            if prune(node.bound):
                cache.pop(node.seq, None)
                continue
            res = cache.pop(node.seq, None) or self.lp(node.lb, node.ub)
            nodes += 1
            if res.status != OPTIMAL or prune(res.fun):
                continue
            xb = res.x[priority]
            frac = np.flatnonzero((xb > INT_TOL) & (xb < 1 - INT_TOL))
            if frac.size == 0:
                offer(res.x, res.fun)
                continue
            if nodes == 1 or nodes % 25 == 0:
                round_up(res.x, node.lb, node.ub)
            # idle power left unpaid by the relaxation; argmax keeps priority order on ties
            score = self.weight[frac] * np.minimum(xb[frac], 1 - xb[frac])
            first = frac[int(np.argmax(score))] if score.max() > 0 else frac[0]
            j = self.pick(priority[first], res.x)
            for v in (1.0, 0.0):
                lb, ub = node.lb.copy(), node.ub.copy()
                lb[j] = ub[j] = v
                heapq.heappush(heap, _Node(res.fun, next(counter), lb, ub))
        open_bound = min((n.bound for n in heap), default=inc["val"])
        return inc["x"], inc["val"], open_bound, root, nodes, stopped

    def lex_refine(self, x, value, order, *, deadline=math.inf, node_limit=25, budget=200):
        """Walk the binaries in ``order``, preferring 0 wherever some solution
        with the same objective allows it.

        Bits the current witness already has at 0 are settled for free; only
        its 1-bits need an existence check. A check that runs out of nodes, or
        finds the shared ``budget`` spent, keeps the bit at 1, so the outcome
        stays deterministic. Path bits follow from the rest.
        """
        lb, ub = self.lb0.copy(), self.ub0.copy()
        cutoff = value + max(1e-9, 1e-9 * abs(value))
        nodes = 0
        for j in order:
            if round(x[j]) == 0:
                lb[j] = ub[j] = 0.0
                continue
            if nodes >= budget or time.perf_counter() > deadline:
                lb[j] = ub[j] = 1.0
                continue
            tub = ub.copy()
            tub[j] = 0.0
            wx, _, _, _, n, _ = self.run(lb, tub, deadline=deadline,
                                         node_limit=min(node_limit, budget - nodes),
                                         cutoff=cutoff)
            nodes += n
            if wx is not None:
                x, ub = wx, tub
            else:
                lb[j] = ub[j] = 1.0
        return x, nodes


def solve(
    model: MilpModel,
    gap_tol: float = 1e-6,
    time_limit: float = 300.0,
    lp_method: str = "highs",
    node_limit: int | None = None,
    tie_break: bool = True,
) -> Solution:
    """Best-first branch and bound on the binaries; LP relaxation bounds.

    With ``tie_break`` the optimum is then moved to the lexicographically
    smallest activation vector among solutions of equal objective, followed
    by the smallest placement of unsplittable tasks, so results do not
    depend on which tie the search hit first.
    """
    start = time.perf_counter()
    if not model.tasks:
        values = np.zeros(model.n_vars)
        return Solution.from_values(model, values, gap=0.0, bound=0.0, root_bound=0.0)

    search = _Search(model, lp_method, gap_tol)
    deadline = start + time_limit
    x, val, open_bound, root, nodes, stopped = search.run(
        search.lb0, search.ub0, deadline=deadline, node_limit=node_limit
    )
    root_bound = root.fun if root.status == OPTIMAL else math.nan
    if x is None:
        status = STATUS_GAP_LIMIT if stopped else STATUS_INFEASIBLE
        return Solution(status, root_bound=root_bound,
                        solve_time=time.perf_counter() - start, nodes=nodes)
    bound = min(open_bound, val)
    gap = max(0.0, (val - bound) / max(abs(val), 1e-12))
    status = STATUS_OPTIMAL if (not stopped or gap <= gap_tol) else STATUS_GAP_LIMIT
    if status == STATUS_OPTIMAL and tie_break:
        # activations first; split tasks have interchangeable shares, so only
        # whole-task placements are ordered after that
        whole = {t.id for t in model.tasks if t.split_limit == 1}
        order = sorted(model.d_d.values())
        order += sorted(j for (s, _), j in model.d_sd.items() if s in whole)
        x, extra = search.lex_refine(x, val, order, deadline=deadline)
        nodes += extra
    values = _polish(model, x, search.lp)
    elapsed = time.perf_counter() - start
    sol = Solution.from_values(
        model, values, status, gap=gap if stopped else 0.0, bound=bound,
        root_bound=root_bound, solve_time=elapsed, nodes=nodes,
    )
    log.debug("solved %d vars in %.3fs, %d nodes, obj %.6f", model.n_vars, elapsed, nodes, sol.objective)
    return sol


def _polish(model: MilpModel, x, lp) -> np.ndarray:
    """Re-solve with binaries fixed and zero out workload on unused pairs."""
    _, _, _, _, _, lb, ub = model.arrays()
    bins = model.binary_indices()
    vals = np.round(x[bins])
    lb, ub = lb.copy(), ub.copy()
    lb[bins] = ub[bins] = vals
    for key, i in model.d_sd.items():
        if vals[np.searchsorted(bins, i)] == 0:
            ub[model.x[key]] = 0.0
    res = lp(lb, ub)
    out = res.x.copy() if res.status == OPTIMAL else x.copy()
    out[bins] = vals
    for key, i in model.d_sd.items():
        xi = model.x[key]
        if out[i] == 0:
            out[xi] = 0.0
        else:
            v = min(max(out[xi], 0.0), model.ub[xi])
            # drop solver round-off such as 1999.999999999999
            snapped = round(v, 6)
            out[xi] = snapped if abs(v - snapped) <= 1e-9 * max(1.0, v) else v
    return out


# ----------------------------------------------------------------------------
# verification


@dataclass
class VerifyReport:
    residuals: dict[str, float]
    objective: float
    recomputed: float
    breakdown: PowerBreakdown | None = None

    @property
    def objective_delta(self) -> float:
        return abs(self.objective - self.recomputed) / max(abs(self.recomputed), 1e-12)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def ok(self, tol: float = 1e-6, rel: float = 1e-9) -> bool:
        return self.max_residual <= tol and self.objective_delta <= rel

    def lines(self) -> list[str]:
        out = [f"{lab:>4}  {v:.3e}" for lab, v in sorted(self.residuals.items())]
        out.append(f"objective {self.objective:.9f} recomputed {self.recomputed:.9f}")
        return out


def verify(solution: Solution, model: MilpModel) -> VerifyReport:
    """Re-check every constraint family and recompute power independently."""
    if solution.values is None:
        return VerifyReport({}, math.nan, math.nan)
    v = np.asarray(solution.values, dtype=float)
    res: dict[str, float] = {}
    for con in model.constraints:
        lhs = float(np.dot(con.coef, v[list(con.index)])) if con.index else 0.0
        if con.sense == LE:
            viol = lhs - con.rhs
        elif con.sense == GE:
            viol = con.rhs - lhs
        else:
            viol = abs(lhs - con.rhs)
        res[con.label] = max(res.get(con.label, 0.0), viol, 0.0)
    bins = model.binary_indices()
    res["INT"] = float(np.max(np.abs(v[bins] - np.round(v[bins])), initial=0.0))
    lo = np.asarray(model.lb)
    hi = np.asarray(model.ub)
    res["BND"] = float(max(np.max(lo - v, initial=0.0), np.max(v - hi, initial=0.0), 0.0))

    alloc = {k: float(v[i]) for k, i in model.x.items() if v[i] > 0}
    assignment = LoadAssignment.from_allocation(model.topology, model.tasks, alloc)
    res["C29"] = max(
        (abs(model.traffic(dev, v) - assignment.traffic.get(dev, 0.0)) for dev in model.psi),
        default=0.0,
    )
    topo = model.topology
    bad_route = 0.0
    for (tid, d), route in model.routes.items():
        for a, b in zip(route, route[1:]):
            if b not in topo.neighbors(a):
                bad_route = 1.0
    res["C23"] = bad_route

    # flags as the solution states them, checked against the loads
    assignment.pn_active = {d: bool(round(v[i])) for d, i in model.d_d.items() if round(v[i])}
    assignment.device_active = {d: bool(round(v[i])) for d, i in model.psi.items() if round(v[i])}
    try:
        breakdown = total_power(topo, assignment)
        recomputed = breakdown.total
    except ValueError:
        breakdown, recomputed = None, math.nan
    return VerifyReport(res, model.objective(v), recomputed, breakdown)


# ----------------------------------------------------------------------------
# brute-force oracle


def _compositions(units: int, parts: int, max_nonzero: int | None):
    """All ways to write ``units`` as an ordered sum of ``parts`` non-negative ints."""
    out = []
    for bars in itertools.combinations(range(units + parts - 1), parts - 1):
        prev = -1
        comp = []
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(units + parts - 2 - prev)
        if max_nonzero is None or sum(1 for c in comp if c) <= max_nonzero:
            out.append(comp)
    return np.asarray(out, dtype=float).reshape(-1, parts)


def grid_slack_bound(model: MilpModel, grid_step: float = 100.0) -> float:
    """Worst-case cost of rounding each task's placement to the grid."""
    topo = model.topology
    total = 0.0
    for t in model.tasks:
        worst = 0.0
        for d in model.pns:
            p = topo.profile(d)
            cost = p.pue * p.marginal
            for dev in traffic_devices(topo, model.routes[(t.id, d)]):
                q = topo.profile(dev)
                cost += t.drr * q.pue * q.marginal
            worst = max(worst, cost)
        total += grid_step * worst
    return total


def brute_force(
    model: MilpModel,
    grid_step: float = 100.0,
    max_tasks: int = 3,
    max_pns: int = 6,
    max_combos: int = 20_000_000,
) -> Solution:
    """Exhaustive search over allocations on a MIPS grid.

    Costs are evaluated straight from device profiles and routes, not from
    the model's objective coefficients, so this is an independent check.
    """
    start = time.perf_counter()
    topo = model.topology
    tasks, pns = model.tasks, model.pns
    if len(tasks) > max_tasks or len(pns) > max_pns:
        raise SizeLimitError(
            f"brute force limited to {max_tasks} tasks and {max_pns} processors"
        )
    if not tasks:
        return Solution.from_values(model, np.zeros(model.n_vars))

    comps = []
    for t in tasks:
        units = t.omega / grid_step
        if abs(units - round(units)) > 1e-9:
            raise ValueError(f"task {t.id} demand is not a multiple of the grid")
        comps.append(_compositions(int(round(units)), len(pns), t.split_limit) * grid_step)
    n_total = math.prod(len(c) for c in comps)
    if n_total > max_combos:
        raise SizeLimitError(f"{n_total} grid points exceed the limit of {max_combos}")

    devices = sorted({d for key in model.routes for d in traffic_devices(topo, model.routes[key])})
    links = sorted({(a, b) for r in model.routes.values() for a, b in zip(r, r[1:])})
    aps = [topo.ap(c) for c in topo.clusters()]
    dev_ix = {d: i for i, d in enumerate(devices)}
    link_ix = {l: i for i, l in enumerate(links)}

    # per-task incidence matrices scaled by the task's data rate ratio
    def incidence(t):
        dev_m = np.zeros((len(pns), len(devices)))
        link_m = np.zeros((len(pns), len(links)))
        ap_m = np.zeros((len(pns), len(aps)))
        for k, d in enumerate(pns):
            route = model.routes[(t.id, d)]
            for dev in traffic_devices(topo, route):
                dev_m[k, dev_ix[dev]] = t.drr
            for a, b in zip(route, route[1:]):
                link_m[k, link_ix[(a, b)]] = t.drr
            if topo.kind(d) is K.VN:
                ap_m[k, aps.index(topo.ap(topo.device(d).cluster))] = t.drr
        return dev_m, link_m, ap_m

    inc = [incidence(t) for t in tasks]
    pn_cap = np.array([topo.profile(d).capacity for d in pns])
    pn_marg = np.array([topo.profile(d).pue * topo.profile(d).marginal for d in pns])
    pn_idle = np.array([topo.profile(d).charged_idle for d in pns])
    dv_marg = np.array([topo.profile(d).pue * topo.profile(d).marginal for d in devices])
    dv_idle = np.array([topo.profile(d).charged_idle for d in devices])
    link_cap = np.array([topo.link_capacity(a, b) for a, b in links])
    ap_cap = np.array([topo.profile(a).capacity for a in aps])

    # all but the last task enumerated as a product, the last one broadcast
    head = comps[:-1]
    tail = comps[-1]
    tdev, tlink, tap = (tail @ m for m in inc[-1])
    best_val, best = math.inf, None
    for combo in itertools.product(*[range(len(c)) for c in head]):
        load = np.zeros(len(pns))
        dv = np.zeros(len(devices))
        lk = np.zeros(len(links))
        ap = np.zeros(len(aps))
        for s, idx in enumerate(combo):
            row = head[s][idx]
            load += row
            dv += row @ inc[s][0]
            lk += row @ inc[s][1]
            ap += row @ inc[s][2]
        L = load + tail
        D = dv + tdev
        ok = np.all(L <= pn_cap + 1e-9, axis=1)
        ok &= np.all(lk + tlink <= link_cap + 1e-9, axis=1)
        ok &= np.all(ap + tap <= ap_cap + 1e-9, axis=1)
        if not ok.any():
            continue
        cost = L @ pn_marg + (L > 0) @ pn_idle + D @ dv_marg + (D > 0) @ dv_idle
        cost = np.where(ok, cost, np.inf)
        k = int(np.argmin(cost))
        if cost[k] < best_val - 1e-9:
            best_val = float(cost[k])
            best = [head[s][idx] for s, idx in enumerate(combo)] + [tail[k]]

    elapsed = time.perf_counter() - start
    if best is None:
        return Solution(STATUS_INFEASIBLE, solve_time=elapsed)
    alloc = {}
    for t, row in zip(tasks, best):
        for d, x in zip(pns, row):
            if x > 0:
                alloc[(t.id, d)] = float(x)
    sol = Solution.from_allocation(model, alloc)
    sol.solve_time = elapsed
    sol.gap = 0.0
    return sol
