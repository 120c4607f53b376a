"""Linear-program subproblems for branch and bound.

Two interchangeable routines solve ``min c x`` subject to ``A_ub x <= b_ub``,
``A_eq x = b_eq`` and ``lb <= x <= ub``:

* ``"highs"`` uses the HiGHS dual simplex (sparse);
* ``"simplex"`` is a dense two-phase tableau simplex, kept dependency-free
  and used to cross-check the former on small models.

:class:`BoxLP` holds one constraint system and re-solves it under changing
variable bounds, which is all branch and bound needs. Its HiGHS instance
keeps the previous basis, so sibling nodes start warm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import highspy
from scipy import sparse
from scipy.optimize import linprog

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    fun: float = float("nan")
    iterations: int = 0


def solve_lp(c, a_ub, b_ub, a_eq, b_eq, lb, ub, method: str = "highs") -> LPResult:
    if method == "highs":
        return _highs(c, a_ub, b_ub, a_eq, b_eq, lb, ub)
    if method == "simplex":
        return simplex(c, a_ub, b_ub, a_eq, b_eq, lb, ub)
    raise ValueError(f"unknown LP method {method!r}")


def _highs(c, a_ub, b_ub, a_eq, b_eq, lb, ub) -> LPResult:
    kw = {}
    if a_ub is not None and a_ub.shape[0]:
        kw.update(A_ub=a_ub, b_ub=b_ub)
    if a_eq is not None and a_eq.shape[0]:
        kw.update(A_eq=a_eq, b_eq=b_eq)
    res = linprog(
        c, bounds=np.column_stack([lb, ub]), method="highs", **kw
    )
    if res.status == 0:
        return LPResult(OPTIMAL, res.x, float(res.fun), int(res.nit))
    if res.status == 2:
        return LPResult(INFEASIBLE)
    if res.status == 3:
        return LPResult(UNBOUNDED)
    raise RuntimeError(f"LP solver failed: {res.message}")


class BoxLP:
    """``min c x`` over fixed rows, solved repeatedly for new ``lb``/``ub``."""

    def __init__(self, c, a_ub, b_ub, a_eq, b_eq, method: str = "highs"):
        if method not in ("highs", "simplex"):
            raise ValueError(f"unknown LP method {method!r}")
        self.args = (c, a_ub, b_ub, a_eq, b_eq)
        self.method = method
        self.n = len(c)
        self._h = self._highs_model(*self.args) if method == "highs" else None

    def _highs_model(self, c, a_ub, b_ub, a_eq, b_eq):
        blocks, lo, hi = [], [], []
        if a_ub is not None and a_ub.shape[0]:
            blocks.append(sparse.csr_matrix(a_ub))
            lo.append(np.full(a_ub.shape[0], -highspy.kHighsInf))
            hi.append(np.asarray(b_ub, dtype=float))
        if a_eq is not None and a_eq.shape[0]:
            blocks.append(sparse.csr_matrix(a_eq))
            lo.append(np.asarray(b_eq, dtype=float))
            hi.append(np.asarray(b_eq, dtype=float))
        a = sparse.vstack(blocks, format="csr") if blocks else sparse.csr_matrix((0, self.n))
        lp = highspy.HighsLp()
        lp.num_col_, lp.num_row_ = self.n, a.shape[0]
        lp.col_cost_ = np.asarray(c, dtype=float)
        lp.col_lower_ = np.zeros(self.n)
        lp.col_upper_ = np.full(self.n, highspy.kHighsInf)
        lp.row_lower_ = np.concatenate(lo) if lo else np.zeros(0)
        lp.row_upper_ = np.concatenate(hi) if hi else np.zeros(0)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
        lp.a_matrix_.start_ = a.indptr
        lp.a_matrix_.index_ = a.indices
        lp.a_matrix_.value_ = a.data
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.passModel(lp)
        return h

    def solve(self, lb, ub) -> LPResult:
        if self._h is None:
            return solve_lp(*self.args, lb, ub, self.method)
        h = self._h
        ub = np.where(np.isfinite(ub), ub, highspy.kHighsInf)
        h.changeColsBounds(self.n, np.arange(self.n, dtype=np.int32),
                           np.asarray(lb, dtype=float), ub)
        h.run()
        status = h.getModelStatus()
        if status == highspy.HighsModelStatus.kOptimal:
            x = np.asarray(h.getSolution().col_value)
            return LPResult(OPTIMAL, x, float(h.getInfo().objective_function_value),
                            int(h.getInfo().simplex_iteration_count))
        if status == highspy.HighsModelStatus.kInfeasible:
            return LPResult(INFEASIBLE)
        # anything murkier gets a cold solve
        h.clearSolver()
        return solve_lp(*self.args, lb, ub, self.method)


def _dense(a, ncols):
    if a is None:
        return np.zeros((0, ncols))
    if sparse.issparse(a):
        return a.toarray()
    return np.atleast_2d(np.asarray(a, dtype=float)).reshape(-1, ncols)


def _equilibrate(a, iters=4):
    """Row and column scale factors bringing entries of ``a`` near magnitude 1."""
    rows = np.ones(a.shape[0])
    cols = np.ones(a.shape[1])
    for _ in range(iters):
        mag = np.abs(a * rows[:, None] * cols[None, :])
        rmax = mag.max(axis=1, initial=0.0)
        rows /= np.sqrt(np.where(rmax > 0, rmax, 1.0))
        mag = np.abs(a * rows[:, None] * cols[None, :])
        cmax = mag.max(axis=0, initial=0.0)
        cols /= np.sqrt(np.where(cmax > 0, cmax, 1.0))
    return rows, cols


def simplex(
    c, a_ub, b_ub, a_eq, b_eq, lb, ub,
    tol: float = 1e-9, max_iter: int = 50000, refactor: int = 100,
) -> LPResult:
    """Dense two-phase primal simplex.

    Finite lower bounds are shifted out and finite upper bounds become rows.
    The problem is equilibrated first. Pricing is Dantzig's rule, switching
    to Bland's rule during runs of degenerate pivots so the method cannot
    cycle; the tableau is rebuilt from the original matrix every
    ``refactor`` pivots to keep round-off in check.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(~np.isfinite(lb)):
        raise ValueError("simplex needs finite lower bounds")
    if np.any(ub < lb - tol):
        return LPResult(INFEASIBLE)
    A1 = _dense(a_ub, n)
    b1 = np.asarray(b_ub if b_ub is not None else [], dtype=float) - A1 @ lb
    A2 = _dense(a_eq, n)
    b2 = np.asarray(b_eq if b_eq is not None else [], dtype=float) - A2 @ lb
    fin = np.flatnonzero(np.isfinite(ub))
    A3 = np.zeros((fin.size, n))
    A3[np.arange(fin.size), fin] = 1.0
    b3 = (ub - lb)[fin]

    # rows: [A1; A3] get slacks, A2 does not
    A_le = np.vstack([A1, A3])
    b_le = np.concatenate([b1, b3])
    m_le, m_eq = A_le.shape[0], A2.shape[0]
    m = m_le + m_eq
    A_struct = np.vstack([A_le, A2])
    b = np.concatenate([b_le, b2])
    rs, cs = _equilibrate(A_struct)
    A_struct = A_struct * rs[:, None] * cs[None, :]
    b = b * rs
    cost = c * cs
    A = np.zeros((m, n + m_le))
    A[:, :n] = A_struct
    A[:m_le, n:] = np.eye(m_le)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # slack basis where possible, artificials elsewhere
    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_le] = neg[:m_le]
    art_rows = np.flatnonzero(needs_art)
    n_struct = n + m_le
    full = np.zeros((m, n_struct + art_rows.size + 1))
    full[:, :n_struct] = A
    full[:, -1] = b
    basis = np.empty(m, dtype=int)
    for k, r in enumerate(art_rows):
        full[r, n_struct + k] = 1.0
        basis[r] = n_struct + k
    for r in np.flatnonzero(~needs_art):
        basis[r] = n + r
    T = full.copy()
    feas_tol = tol * max(1.0, np.abs(b).max(initial=0.0))

    iters = 0

    def pivot(r, j):
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.flatnonzero(col)
        T[nz] -= np.outer(col[nz], T[r])
        basis[r] = j

    def rebuild(src):
        # T = B^-1 [A | b] from the original rows
        B = src[:, basis]
        try:
            T[:] = np.linalg.solve(B, src)
        except np.linalg.LinAlgError:
            pass

    def reduced(cost_row):
        return cost_row - cost_row[basis] @ T

    def run(cost_row, allowed, src):
        nonlocal iters
        z = reduced(cost_row)
        degenerate = 0
        since = 0
        while True:
            iters += 1
            if iters > max_iter:
                raise RuntimeError("simplex iteration limit reached")
            cand = np.flatnonzero((z[:-1] < -tol) & allowed)
            if cand.size == 0:
                return z
            j = cand[0] if degenerate > 20 else cand[np.argmin(z[cand])]
            col = T[:, j]
            pos = np.flatnonzero(col > tol)
            if pos.size == 0:
                return None
            ratios = np.maximum(T[pos, -1], 0.0) / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + tol * max(1.0, abs(best))]
            if degenerate > 20:
                r = ties[np.argmin(basis[ties])]
            else:
                r = ties[np.argmax(np.abs(col[ties]))]
            degenerate = degenerate + 1 if best <= tol else 0
            pivot(r, j)
            since += 1
            if since >= refactor:
                rebuild(src)
                since = 0
            z = reduced(cost_row)

    ncols = T.shape[1]
    if art_rows.size:
        phase1 = np.zeros(ncols)
        phase1[n_struct:-1] = 1.0
        allowed = np.ones(ncols - 1, dtype=bool)
        z = run(phase1, allowed, full)
        if z is None or -z[-1] > feas_tol:
            return LPResult(INFEASIBLE, iterations=iters)
        # pivot remaining artificials out of the basis
        for r in range(m):
            if basis[r] >= n_struct:
                nz = np.flatnonzero(np.abs(T[r, :n_struct]) > tol)
                if nz.size:
                    pivot(r, nz[np.argmax(np.abs(T[r, nz]))])
        keep = basis < n_struct
        T = np.hstack([T[keep][:, :n_struct], T[keep][:, -1:]])
        full = np.hstack([full[keep][:, :n_struct], full[keep][:, -1:]])
        basis = basis[keep]
        m = basis.size
    else:
        T = np.hstack([T[:, :n_struct], T[:, -1:]])
        full = np.hstack([full[:, :n_struct], full[:, -1:]])

    phase2 = np.zeros(n_struct + 1)
    phase2[:n] = cost
    z = run(phase2, np.ones(n_struct, dtype=bool), full)
    if z is None:
        return LPResult(UNBOUNDED, iterations=iters)
    y = np.zeros(n_struct)
    y[basis] = T[:, -1]
    x = y[:n] * cs + lb
    return LPResult(OPTIMAL, x, float(c @ x), iters)
