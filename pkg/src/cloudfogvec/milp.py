"""Mixed-integer model of minimum-power task placement.

Variables
---------
``X_s{t}_d{pn}``  workload of task ``t`` placed on processor ``pn`` (MIPS)
``D_s{t}_d{pn}``  1 when task ``t`` uses ``pn``
``A_d{pn}``       1 when ``pn`` carries any workload
``P_i{dev}``      1 when network device ``dev`` carries any traffic

Flow conservation and per-link flows collapse onto tree routes: the traffic
through a device is the sum of ``drr * X`` over the (task, processor) pairs
whose route contains it.  These expressions are kept in
:attr:`MilpModel.traffic_expr` rather than as variables.

Constraint labels follow the numbering used in the objective/constraint
derivation (``C24`` demand, ``C33`` processor capacity, ...).  Rows labelled
``CUT`` and ``SYM`` are valid inequalities and symmetry breakers that do not
change the optimum; they can be turned off.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .profiles import DeviceKind
from .topology import Topology, traffic_devices
from .workload import Task

K = DeviceKind
MODEL_LABELS = tuple(f"C{n}" for n in range(23, 37))
LE, GE, EQ = "<=", ">=", "="


@dataclass(frozen=True)
class Constraint:
    label: str
    name: str
    index: tuple[int, ...]
    coef: tuple[float, ...]
    sense: str
    rhs: float


@dataclass
class MilpModel:
    topology: Topology
    tasks: tuple[Task, ...]
    pns: tuple[str, ...]
    names: list[str] = field(default_factory=list)
    kinds: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    constant: float = 0.0
    constraints: list[Constraint] = field(default_factory=list)
    x: dict = field(default_factory=dict)
    d_sd: dict = field(default_factory=dict)
    d_d: dict = field(default_factory=dict)
    psi: dict = field(default_factory=dict)
    routes: dict = field(default_factory=dict)
    traffic_expr: dict = field(default_factory=dict)
    identities: list[tuple[str, str]] = field(default_factory=list)
    big_m: dict = field(default_factory=dict)
    # delta_d indices of interchangeable PNs, activated in this order
    pools: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def labels(self) -> set[str]:
        return {c.label for c in self.constraints} | {lab for lab, _ in self.identities}

    def _add_var(self, name, kind, lb, ub, integer, cost=0.0) -> int:
        self.names.append(name)
        self.kinds.append(kind)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(integer)
        self.cost.append(float(cost))
        return len(self.names) - 1

    def _add(self, label, name, terms: dict[int, float], sense, rhs):
        idx = tuple(sorted(terms))
        self.constraints.append(
            Constraint(label, name, idx, tuple(float(terms[i]) for i in idx), sense, float(rhs))
        )

    def binary_indices(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.integer, dtype=bool))

    def arrays(self):
        """``(c, A_ub, b_ub, A_eq, b_eq, lb, ub)``; ``>=`` rows are negated."""
        rows_ub, rows_eq = [], []
        for con in self.constraints:
            (rows_eq if con.sense == EQ else rows_ub).append(con)

        def stack(rows, flip):
            data, ri, ci, rhs = [], [], [], []
            for r, con in enumerate(rows):
                sign = -1.0 if (flip and con.sense == GE) else 1.0
                data.extend(sign * v for v in con.coef)
                ri.extend([r] * len(con.index))
                ci.extend(con.index)
                rhs.append(sign * con.rhs)
            mat = sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), self.n_vars))
            return mat, np.asarray(rhs, dtype=float)

        a_ub, b_ub = stack(rows_ub, True)
        a_eq, b_eq = stack(rows_eq, False)
        return (
            np.asarray(self.cost, dtype=float), a_ub, b_ub, a_eq, b_eq,
            np.asarray(self.lb, dtype=float), np.asarray(self.ub, dtype=float),
        )

    def objective(self, values: Sequence[float]) -> float:
        return float(np.dot(self.cost, values)) + self.constant

    def traffic(self, device: str, values: Sequence[float]) -> float:
        return sum(c * values[i] for i, c in self.traffic_expr[device].items())


def _marginal_cost(topology: Topology, task: Task, pn: str, route) -> float:
    prof = topology.profile(pn)
    cost = prof.pue * prof.marginal
    for dev in traffic_devices(topology, route):
        p = topology.profile(dev)
        cost += task.drr * p.pue * p.marginal
    return cost


def build_model(
    topology: Topology,
    tasks: Iterable[Task],
    mask: Iterable[str],
    *,
    cuts: bool = True,
    symmetry: bool = True,
    min_share: float = 1.0,
) -> MilpModel:
    """Assemble the placement model over the processors in ``mask``.

    ``min_share`` is the least workload (MIPS) a task may place on a processor
    it uses.  Infeasibility is not detected here.
    """
    tasks = tuple(tasks)
    order = {d: i for i, d in enumerate(topology.processing_nodes())}
    pns = tuple(sorted(set(mask), key=lambda d: order[d]))
    if not pns:
        raise ValueError("availability mask is empty")
    for t in tasks:
        topology.zone_of_cluster(t.cluster)
    m = MilpModel(topology, tasks, pns)

    for t in tasks:
        for d in pns:
            m.routes[(t.id, d)] = topology.path(t.cluster, d)

    # variables
    for t in tasks:
        for d in pns:
            cap = topology.profile(d).capacity
            m.x[(t.id, d)] = m._add_var(
                f"X_s{t.id}_d{d}", "X", 0.0, min(t.omega, cap), False,
                _marginal_cost(topology, t, d, m.routes[(t.id, d)]),
            )
    for t in tasks:
        for d in pns:
            m.d_sd[(t.id, d)] = m._add_var(f"D_s{t.id}_d{d}", "dsd", 0, 1, True)
    for d in pns:
        m.d_d[d] = m._add_var(f"A_d{d}", "dd", 0, 1, True, topology.profile(d).charged_idle)

    devices: dict[str, None] = {}
    for t in tasks:
        for d in pns:
            for dev in traffic_devices(topology, m.routes[(t.id, d)]):
                devices.setdefault(dev, None)
    canon = {dv.id: i for i, dv in enumerate(topology.devices)}
    for dev in sorted(devices, key=canon.__getitem__):
        m.psi[dev] = m._add_var(
            f"P_i{dev}", "psi", 0, 1, True, topology.profile(dev).charged_idle
        )

    # traffic expressions: path incidence replaces per-link flow conservation
    for dev in m.psi:
        m.traffic_expr[dev] = {}
    for t in tasks:
        for d in pns:
            m.identities.append(("C23", f"route_s{t.id}_d{d}"))
            m.identities.append(("C32", f"lambda_s{t.id}_d{d}"))
            for dev in traffic_devices(topology, m.routes[(t.id, d)]):
                m.traffic_expr[dev][m.x[(t.id, d)]] = t.drr
    for dev in m.psi:
        m.identities.append(("C29", f"lambda_{dev}"))

    m1 = {t.id: t.omega for t in tasks}
    m2 = max(len(tasks), 1)
    m3 = sum(t.flow for t in tasks)
    eps_x = {t.id: min(min_share, t.omega) for t in tasks}
    eps_l = min((t.drr * eps_x[t.id] for t in tasks), default=0.0)
    m.big_m = {"M1": m1, "M2": m2, "M3": m3, "eps_x": eps_x, "eps_lambda": eps_l}

    for t in tasks:
        m._add("C24", f"C24_s{t.id}", {m.x[(t.id, d)]: 1.0 for d in pns}, EQ, t.omega)
    for t in tasks:
        for d in pns:
            xi, di = m.x[(t.id, d)], m.d_sd[(t.id, d)]
            m._add("C25", f"C25_s{t.id}_d{d}", {xi: 1.0, di: -eps_x[t.id]}, GE, 0.0)
            m._add("C26", f"C26_s{t.id}_d{d}", {xi: 1.0, di: -m1[t.id]}, LE, 0.0)
    for d in pns:
        terms = {m.d_sd[(t.id, d)]: 1.0 for t in tasks}
        m._add("C27", f"C27_d{d}", {**terms, m.d_d[d]: -1.0}, GE, 0.0)
        m._add("C28", f"C28_d{d}", {**terms, m.d_d[d]: -float(m2)}, LE, 0.0)
    for dev, expr in m.traffic_expr.items():
        p = m.psi[dev]
        m._add("C30", f"C30_i{dev}", {**expr, p: -eps_l}, GE, 0.0)
        m._add("C31", f"C31_i{dev}", {**expr, p: -m3}, LE, 0.0)
    for d in pns:
        m._add(
            "C33", f"C33_d{d}", {m.x[(t.id, d)]: 1.0 for t in tasks}, LE,
            topology.profile(d).capacity,
        )

    # per directed link
    link_terms: dict[tuple[str, str], dict[int, float]] = {}
    for t in tasks:
        for d in pns:
            route = m.routes[(t.id, d)]
            xi = m.x[(t.id, d)]
            for a, b in zip(route, route[1:]):
                terms = link_terms.setdefault((a, b), {})
                terms[xi] = terms.get(xi, 0.0) + t.drr
    for (a, b), terms in sorted(link_terms.items(), key=lambda kv: (canon[kv[0][0]], canon[kv[0][1]])):
        m._add("C34", f"C34_{a}_{b}", terms, LE, topology.link_capacity(a, b))

    # wireless capacity of each AP toward its own VNs
    for cluster in topology.clusters():
        ap = topology.ap(cluster)
        local = set(topology.vns(cluster)) & set(pns)
        terms = {
            m.x[(t.id, d)]: t.drr for t in tasks for d in pns if d in local
        }
        if terms:
            m._add("C35", f"C35_{ap}", terms, LE, topology.profile(ap).capacity)
    if not any(c.label == "C35" for c in m.constraints):
        m.identities.append(("C35", "no VN-bound traffic"))

    for t in tasks:
        if t.split_limit is not None:
            m._add(
                "C36", f"C36_s{t.id}", {m.d_sd[(t.id, d)]: 1.0 for d in pns}, LE,
                t.split_limit,
            )

    if cuts:
        _add_cuts(m)
    if symmetry:
        _add_symmetry(m)
    return m


def _add_cuts(m: MilpModel):
    topo = m.topology
    for d in m.pns:
        terms = {m.x[(t.id, d)]: 1.0 for t in m.tasks}
        if terms:
            m._add("CUT", f"Kcap_d{d}", {**terms, m.d_d[d]: -topo.profile(d).capacity}, LE, 0.0)
        common = None
        for t in m.tasks:
            di = m.d_sd[(t.id, d)]
            m._add("CUT", f"Kuse_s{t.id}_d{d}", {di: 1.0, m.d_d[d]: -1.0}, LE, 0.0)
            devs = traffic_devices(topo, m.routes[(t.id, d)])
            common = set(devs) if common is None else common & set(devs)
        for dev in sorted(common or ()):
            m._add("CUT", f"Kpath_d{d}_i{dev}", {m.d_d[d]: 1.0, m.psi[dev]: -1.0}, LE, 0.0)
    # a device carries traffic whenever any share of a task is routed through it
    for t in m.tasks:
        through: dict[str, dict[int, float]] = {}
        for d in m.pns:
            for dev in traffic_devices(topo, m.routes[(t.id, d)]):
                through.setdefault(dev, {})[m.x[(t.id, d)]] = 1.0
        for dev, terms in through.items():
            m._add("CUT", f"Kflow_s{t.id}_i{dev}", {**terms, m.psi[dev]: -t.omega}, LE, 0.0)
    # unsplit tasks land whole, so a processor holds at most floor(C / smallest demand)
    if m.tasks and all(t.split_limit == 1 for t in m.tasks):
        smallest = min(t.omega for t in m.tasks)
        for d in m.pns:
            fits = math.floor(topo.profile(d).capacity / smallest + 1e-9)
            if fits < len(m.tasks):
                terms = {m.d_sd[(t.id, d)]: 1.0 for t in m.tasks}
                m._add("CUT", f"Kcnt_d{d}", {**terms, m.d_d[d]: -float(fits)}, LE, 0.0)


def _add_symmetry(m: MilpModel):
    """Identical servers in the cloud pool and VNs of one cluster are used in order."""
    topo = m.topology
    groups: dict[tuple, list[str]] = {}
    for d in m.pns:
        dev = topo.device(d)
        if dev.kind in (K.CC, K.VN):
            groups.setdefault((dev.kind, dev.cluster), []).append(d)
    for members in groups.values():
        for a, b in zip(members, members[1:]):
            m._add("SYM", f"S_{b}", {m.d_d[b]: 1.0, m.d_d[a]: -1.0}, LE, 0.0)
        if len(members) > 1:
            m.pools.append(tuple(m.d_d[d] for d in members))



# ----------------------------------------------------------------------------
# export


def _num(v: float) -> str:
    v = float(v)
    if v == 0:
        return "0"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _lp_terms(pairs, width=6) -> list[str]:
    parts = []
    for k, (coef, name) in enumerate(pairs):
        sign = "-" if coef < 0 else "+"
        if k == 0 and sign == "+":
            parts.append(f"{_num(abs(coef))} {name}")
        else:
            parts.append(f"{sign} {_num(abs(coef))} {name}")
    lines = [" ".join(parts[i:i + width]) for i in range(0, len(parts), width)]
    return lines or ["0"]


def export_model(model: MilpModel, fmt: str = "lp") -> str:
    """Serialise as CPLEX-LP (``"lp"``) or fixed-column MPS (``"mps"``).

    MPS names are mangled to 8 characters; the table is emitted as comment
    lines (``*``) ahead of the ``NAME`` card and is also available from
    :func:`mps_name_table`.
    """
    if fmt == "lp":
        return _export_lp(model)
    if fmt == "mps":
        return _export_mps(model)
    raise ValueError(f"unknown format {fmt!r}")


def _export_lp(m: MilpModel) -> str:
    out = io.StringIO()
    out.write("\\ minimum-power task placement\n")
    out.write("Minimize\n")
    obj = [(c, m.names[i]) for i, c in enumerate(m.cost) if c != 0]
    lines = _lp_terms(obj)
    out.write(f" obj: {lines[0]}\n")
    for ln in lines[1:]:
        out.write(f"   {ln}\n")
    out.write("Subject To\n")
    for con in m.constraints:
        lines = _lp_terms([(c, m.names[i]) for i, c in zip(con.index, con.coef)])
        out.write(f" {con.name}: {lines[0]}\n")
        for ln in lines[1:]:
            out.write(f"   {ln}\n")
        out.write(f"   {con.sense} {_num(con.rhs)}\n")
    out.write("Bounds\n")
    for i, name in enumerate(m.names):
        if not m.integer[i]:
            out.write(f" {_num(m.lb[i])} <= {name} <= {_num(m.ub[i])}\n")
    out.write("Binaries\n")
    for i, name in enumerate(m.names):
        if m.integer[i]:
            out.write(f" {name}\n")
    out.write("End\n")
    return out.getvalue()


def mps_name_table(m: MilpModel) -> dict[str, str]:
    """Deterministic long-name -> 8-character-name mapping."""
    table = {}
    for i, name in enumerate(m.names):
        table[name] = f"V{i:07d}"
    for r, con in enumerate(m.constraints):
        table[con.name] = f"R{r:07d}"
    if len(m.names) >= 10**7 or len(m.constraints) >= 10**7:
        raise ValueError("model too large for 8-character MPS names")
    return table


def _export_mps(m: MilpModel) -> str:
    table = mps_name_table(m)
    out = io.StringIO()
    for long, short in table.items():
        out.write(f"* {short} {long}\n")
    out.write("NAME          PLACEMNT\n")
    out.write("ROWS\n")
    out.write(" N  OBJ\n")
    code = {LE: "L", GE: "G", EQ: "E"}
    for con in m.constraints:
        out.write(f" {code[con.sense]}  {table[con.name]}\n")
    columns: list[list[tuple[str, float]]] = [[] for _ in m.names]
    for i, c in enumerate(m.cost):
        if c != 0:
            columns[i].append(("OBJ", c))
    for con in m.constraints:
        for i, c in zip(con.index, con.coef):
            columns[i].append((table[con.name], c))

    def field_line(f1, f2, f3, f4):
        return f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}\n"

    out.write("COLUMNS\n")
    in_int = False
    marker = 0
    for i, name in enumerate(m.names):
        if m.integer[i] and not in_int:
            out.write(f"    MARKER{marker:02d}  'MARKER'                 'INTORG'\n")
            in_int = True
        elif not m.integer[i] and in_int:
            out.write(f"    MARKER{marker:02d}  'MARKER'                 'INTEND'\n")
            in_int = False
            marker += 1
        entries = columns[i] or [("OBJ", 0.0)]
        for row, c in entries:
            out.write(field_line("", table[name], row, _num(c)))
    if in_int:
        out.write(f"    MARKER{marker:02d}  'MARKER'                 'INTEND'\n")
    out.write("RHS\n")
    for con in m.constraints:
        if con.rhs != 0:
            out.write(field_line("", "RHS", table[con.name], _num(con.rhs)))
    if m.constant != 0:
        out.write(field_line("", "RHS", "OBJ", _num(-m.constant)))
    out.write("BOUNDS\n")
    for i, name in enumerate(m.names):
        if m.integer[i]:
            out.write(field_line("BV", "BND", table[name], ""))
        else:
            if m.lb[i] != 0:
                out.write(field_line("LO", "BND", table[name], _num(m.lb[i])))
            out.write(field_line("UP", "BND", table[name], _num(m.ub[i])))
    out.write("ENDATA\n")
    return out.getvalue()


# ----------------------------------------------------------------------------
# readers (used to check exports independently of the in-memory model)


@dataclass
class ParsedModel:
    names: list[str]
    cost: dict[str, float]
    rows: list[tuple[str, dict[str, float], str, float]]
    lb: dict[str, float]
    ub: dict[str, float]
    integer: set[str]
    constant: float = 0.0

    def arrays(self):
        """Dense-free arrays ordered by :attr:`names` for ``scipy.optimize.milp``."""
        col = {n: i for i, n in enumerate(self.names)}
        n = len(self.names)
        c = np.zeros(n)
        for k, v in self.cost.items():
            c[col[k]] += v
        data, ri, ci, lo, hi = [], [], [], [], []
        for r, (_, terms, sense, rhs) in enumerate(self.rows):
            for k, v in terms.items():
                data.append(v)
                ri.append(r)
                ci.append(col[k])
            lo.append(rhs if sense in (GE, EQ) else -np.inf)
            hi.append(rhs if sense in (LE, EQ) else np.inf)
        a = sparse.csr_matrix((data, (ri, ci)), shape=(len(self.rows), n))
        lb = np.array([self.lb.get(k, 0.0) for k in self.names])
        ub = np.array([self.ub.get(k, np.inf) for k in self.names])
        integrality = np.array([1 if k in self.integer else 0 for k in self.names])
        return c, a, np.array(lo), np.array(hi), lb, ub, integrality


def _parse_terms(tokens: list[str]) -> dict[str, float]:
    terms: dict[str, float] = {}
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        value = sign * (1.0 if coef is None else coef)
        terms[tok] = terms.get(tok, 0.0) + value
        sign, coef = 1.0, None
    return terms


def read_lp(text: str) -> ParsedModel:
    section = None
    names: dict[str, None] = {}
    cost: dict[str, float] = {}
    rows = []
    lb, ub, integer = {}, {}, set()
    pending: list[str] = []
    pending_name = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            if section == "obj":
                cost = _parse_terms(pending)
            section = {"minimize": "obj", "subject to": "st"}.get(low, low)
            pending = []
            continue
        if section == "obj":
            if ":" in line:
                line = line.split(":", 1)[1]
            pending.extend(line.split())
        elif section == "st":
            toks = line.split()
            if ":" in toks[0]:
                pending_name = toks[0].rstrip(":")
                toks = toks[1:]
                pending = []
            if toks and toks[0] in (LE, GE, EQ):
                rows.append((pending_name, _parse_terms(pending), toks[0], float(toks[1])))
                pending = []
            else:
                pending.extend(toks)
        elif section == "bounds":
            lo, _, name, _, hi = line.split()
            lb[name], ub[name] = float(lo), float(hi)
        elif section == "binaries":
            for name in line.split():
                integer.add(name)
                lb[name], ub[name] = 0.0, 1.0
    for n in cost:
        names.setdefault(n, None)
    for _, terms, _, _ in rows:
        for n in terms:
            names.setdefault(n, None)
    for n in list(lb) + sorted(integer):
        names.setdefault(n, None)
    return ParsedModel(list(names), cost, rows, lb, ub, integer)


def read_mps(text: str) -> ParsedModel:
    """Whitespace-tolerant MPS reader; comment lines map short names back."""
    back: dict[str, str] = {}
    section = None
    obj_row = None
    row_order: list[str] = []
    senses: dict[str, str] = {}
    terms: dict[str, dict[str, float]] = {}
    rhs: dict[str, float] = {}
    names: list[str] = []
    cost: dict[str, float] = {}
    lb, ub, integer = {}, {}, set()
    in_int = False
    constant = 0.0
    for raw in text.splitlines():
        if raw.startswith("*"):
            parts = raw[1:].split()
            if len(parts) == 2:
                back[parts[0]] = parts[1]
            continue
        if not raw.strip():
            continue
        if not raw[0].isspace():
            section = raw.split()[0]
            continue
        toks = raw.split()
        if section == "ROWS":
            kind, name = toks
            if kind == "N":
                obj_row = name
            else:
                senses[name] = {"L": LE, "G": GE, "E": EQ}[kind]
                row_order.append(name)
                terms[name] = {}
        elif section == "COLUMNS":
            if "'MARKER'" in toks:
                in_int = "'INTORG'" in toks
                continue
            col = toks[0]
            if not names or names[-1] != col:
                names.append(col)
            if in_int:
                integer.add(col)
            for row, val in zip(toks[1::2], toks[2::2]):
                v = float(val)
                if row == obj_row:
                    if v != 0:
                        cost[col] = v
                else:
                    terms[row][col] = v
        elif section == "RHS":
            for row, val in zip(toks[1::2], toks[2::2]):
                if row == obj_row:
                    constant = -float(val)
                else:
                    rhs[row] = float(val)
        elif section == "BOUNDS":
            kind, col = toks[0], toks[2]
            if kind == "BV":
                lb[col], ub[col] = 0.0, 1.0
                integer.add(col)
            elif kind == "UP":
                ub[col] = float(toks[3])
            elif kind == "LO":
                lb[col] = float(toks[3])
            elif kind == "FX":
                lb[col] = ub[col] = float(toks[3])
    for col in names:
        if col in integer:
            lb.setdefault(col, 0.0)
            ub.setdefault(col, 1.0)

    def long(n):
        return back.get(n, n)

    return ParsedModel(
        names=[long(n) for n in names],
        cost={long(k): v for k, v in cost.items()},
        rows=[
            (long(r), {long(k): v for k, v in terms[r].items()}, senses[r], rhs.get(r, 0.0))
            for r in row_order
        ],
        lb={long(k): v for k, v in lb.items()},
        ub={long(k): v for k, v in ub.items()},
        integer={long(k) for k in integer},
        constant=constant,
    )
