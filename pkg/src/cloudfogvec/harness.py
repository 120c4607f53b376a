"""Scenario sweeps, savings and CSV reports."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .milp import build_model
from .solver import STATUS_OPTIMAL, Solution, solve, verify
from .workload import Scenario, make_scenario

log = logging.getLogger(__name__)

# (case, strategy) pairs of the standard scenario matrix
CASE_GRID = (
    ("CCA", "SA"),
    ("CFA", "SA"),
    ("CFVA-L", "SA"),
    ("CFVA-L", "DA"),
    ("CFVA-H", "SA"),
    ("CFVA-H", "DA"),
)
TIERS = ("CC", "MF", "LF", "NF", "VN")
COMPONENTS = ("tpc_cc", "tpc_mf", "tpc_lf", "tpc_nf", "tpc_vn", "tpc_net")


class MismatchedRecordError(ValueError):
    pass


@dataclass
class RunRecord:
    architecture: str
    pattern: str
    case: str
    strategy: str
    demand: float
    drr: float
    total: float
    components: dict[str, float]
    tier_alloc: dict[str, float]
    vec_alloc: tuple[float, ...]
    status: str
    gap: float
    solve_time: float
    solution: Solution | None = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OPTIMAL


def run_point(scenario: Scenario, omega: float, **solve_kw) -> RunRecord:
    topo = scenario.topology()
    mask, tasks = make_scenario(scenario, omega, topology=topo)
    model = build_model(topo, tasks, mask)
    sol = solve(model, **solve_kw)
    status = sol.status
    if sol.feasible:
        rep = verify(sol, model)
        if not rep.ok():
            log.warning("verification failed at %s %s: %s", scenario.case, omega, rep.lines())
            status = "unverified"
        comps = {k: sol.breakdown.as_dict()[k] for k in COMPONENTS}
        total = sol.objective
        tiers = sol.tier_alloc(topo)
        vec = tuple(sol.vec_alloc[c] for c in topo.clusters())
    else:
        comps = {k: math.nan for k in COMPONENTS}
        total = math.nan
        tiers = {k: math.nan for k in TIERS}
        vec = tuple(math.nan for _ in topo.clusters())
    return RunRecord(
        scenario.architecture, scenario.pattern, scenario.case, scenario.strategy,
        float(omega), scenario.drr, total, comps, tiers, vec, status, sol.gap,
        sol.solve_time, sol,
    )


def _run_point_args(args):
    scenario, omega, solve_kw = args
    rec = run_point(scenario, omega, **solve_kw)
    rec.solution = None
    return rec


def run_sweep(scenario: Scenario, workers: int = 1, **solve_kw) -> list[RunRecord]:
    """One record per demand point, in sweep order."""
    jobs = [(scenario, w, solve_kw) for w in scenario.demands]
    return _execute(jobs, workers)


def run_grid(
    base: Scenario,
    combos: Sequence[tuple[str, str]] = CASE_GRID,
    drrs: Sequence[float] | None = None,
    workers: int = 1,
    **solve_kw,
) -> list[RunRecord]:
    """Sweep every (case, strategy) pair, and every DRR if given."""
    jobs = []
    for drr in drrs or (base.drr,):
        for case, strategy in combos:
            sc = base.with_(case=case, strategy=strategy, drr=drr)
            jobs.extend((sc, w, solve_kw) for w in sc.demands)
    return _execute(jobs, workers)


def _execute(jobs, workers):
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            # map keeps submission order whatever the completion order
            return list(pool.map(_run_point_args, jobs))
    return [run_point(sc, w, **kw) for sc, w, kw in jobs]


def savings(baseline: RunRecord, candidate: RunRecord) -> float:
    """Percentage of the baseline's power saved by the candidate."""
    for attr in ("architecture", "pattern", "demand", "drr"):
        if getattr(baseline, attr) != getattr(candidate, attr):
            raise MismatchedRecordError(f"records differ in {attr}")
    return 100.0 * (baseline.total - candidate.total) / baseline.total


def _index(records):
    return {
        (r.architecture, r.pattern, r.drr, r.case, r.strategy, r.demand): r
        for r in records
    }


def check_invariants(records: Iterable[RunRecord], rel_tol: float = 1e-6) -> list[str]:
    """Orderings that must hold between optimal records; returns violations."""
    records = list(records)
    idx = _index(records)
    out = []

    def le(a, b, what):
        if a is None or b is None or not (a.ok and b.ok):
            return
        if a.total > b.total * (1 + rel_tol) + 1e-9:
            out.append(
                f"{what}: {a.case}/{a.strategy} {a.total:.6f} > {b.case}/{b.strategy} "
                f"{b.total:.6f} at {a.demand} MIPS, drr {a.drr}"
            )

    for (arch, pat, drr, case, strat, w), r in idx.items():
        key = (arch, pat, drr)
        if strat == "DA":
            le(r, idx.get(key + (case, "SA", w)), "DA <= SA")
        if case == "CFA":
            le(r, idx.get(key + ("CCA", strat, w)), "CFA <= CCA")
            le(r, idx.get(key + ("CCA", "SA", w)), "CFA <= CCA")
        if case.startswith("CFVA"):
            le(r, idx.get(key + ("CFA", strat, w)), "CFVA <= CFA")
            le(r, idx.get(key + ("CFA", "SA", w)), "CFVA <= CFA")
        if case == "CFVA-H":
            le(r, idx.get(key + ("CFVA-L", strat, w)), "CFVA-H <= CFVA-L")

    series: dict[tuple, list[RunRecord]] = {}
    for r in records:
        series.setdefault((r.architecture, r.pattern, r.drr, r.case, r.strategy), []).append(r)
    for recs in series.values():
        recs = sorted(recs, key=lambda r: r.demand)
        for a, b in zip(recs, recs[1:]):
            le(a, b, "demand monotonicity")
    return out


def columns(n_vec: int) -> list[str]:
    cols = ["architecture", "pattern", "case", "strategy", "demand_mips", "drr", "total_w"]
    cols += [f"{c}_w" for c in COMPONENTS]
    cols += [f"alloc_{t.lower()}_mips" for t in TIERS]
    cols += [f"vec{i}_mips" for i in range(1, n_vec + 1)]
    cols += ["status", "gap", "solve_time_s"]
    return cols


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return format(v, ".10g")
    return str(v)


def to_csv(records: Sequence[RunRecord], include_timing: bool = False) -> str:
    """CSV text; solve times are blanked unless asked for, keeping output reproducible."""
    n_vec = max((len(r.vec_alloc) for r in records), default=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns(n_vec))
    for r in records:
        vec = list(r.vec_alloc) + [math.nan] * (n_vec - len(r.vec_alloc))
        row = [r.architecture, r.pattern, r.case, r.strategy, r.demand, r.drr, r.total]
        row += [r.components[c] for c in COMPONENTS]
        row += [r.tier_alloc[t] for t in TIERS]
        row += vec
        row += [r.status, r.gap, r.solve_time if include_timing else math.nan]
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def summary(records: Sequence[RunRecord]) -> str:
    """Min/max savings for every pair of (case, strategy) series."""
    idx = _index(records)
    series = sorted({(r.case, r.strategy) for r in records}, key=lambda cs: (
        [c for c, _ in CASE_GRID].index(cs[0]), cs[1] == "DA"))
    points = sorted({(r.architecture, r.pattern, r.drr, r.demand) for r in records})
    lines = ["baseline -> candidate: min% max% (points)"]
    for i, base in enumerate(series):
        for cand in series[i + 1:]:
            vals = []
            for arch, pat, drr, w in points:
                a = idx.get((arch, pat, drr) + base + (w,))
                b = idx.get((arch, pat, drr) + cand + (w,))
                if a and b and a.ok and b.ok and a.total > 0:
                    vals.append(savings(a, b))
            if vals:
                lines.append(
                    f"{'/'.join(base)} -> {'/'.join(cand)}: "
                    f"{min(vals):.1f} {max(vals):.1f} ({len(vals)})"
                )
    return "\n".join(lines) + "\n"


def report(
    records: Sequence[RunRecord],
    out: str | Path | None = None,
    include_timing: bool = False,
) -> tuple[str, str]:
    """Return (csv, summary); write both when ``out`` is given."""
    if not records:
        raise ValueError("no records to report")
    text = to_csv(records, include_timing)
    summ = summary(records)
    if out is not None:
        out = Path(out)
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            with open(out.with_suffix(".summary.txt"), "w", encoding="utf-8", newline="") as fh:
                fh.write(summ)
        except OSError as exc:
            raise OSError(f"cannot write report to {out}: {exc}") from exc
    return text, summ
