"""Two-phase bounded-variable revised simplex.

Rows are turned into equalities with one logical per row,
``A x - s = 0`` with ``lo <= s <= hi``, so every constraint becomes a bound.
Phase 1 adds an artificial column for each row whose logical starts outside
its range and minimises the artificial sum. The basis is kept as a sparse LU
factorisation (SuperLU) plus a product-form eta file, refactorised every
``refactor_interval`` pivots.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .program import LinearProgram, LpSolution, SolverError, SolverParams

AT_LOWER, AT_UPPER, AT_ZERO, BASIC = 0, 1, 2, 3

_PIVOT_TOL = 1e-9
_TIE_TOL = 1e-12
_DEGENERATE_STEP = 1e-12


class _BasisFactor:
    """LU of the basis at the last refactorisation plus eta updates."""

    def __init__(self, M: sp.csc_matrix, head: np.ndarray):
        B = M[:, head].tocsc()
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError("NUMERICAL_FAILURE", f"singular basis: {exc}") from exc
        self.etas: list[tuple[int, np.ndarray, np.ndarray, float]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        z = self.lu.solve(a)
        for r, idx, vals, piv in self.etas:
            zr = z[r] / piv
            if zr != 0.0:
                z[idx] -= zr * vals
            z[r] = zr
        return z

    def btran(self, w: np.ndarray) -> np.ndarray:
        w = w.copy()
        for r, idx, vals, piv in reversed(self.etas):
            # idx excludes r, so the dot product skips the pivot entry
            w[r] = (w[r] - vals @ w[idx]) / piv
        return self.lu.solve(w, trans="T")

    def push(self, r: int, alpha: np.ndarray):
        nz = np.flatnonzero(np.abs(alpha) > 1e-14)
        nz = nz[nz != r]
        self.etas.append((r, nz, alpha[nz].copy(), float(alpha[r])))


class RevisedSimplex:
    def __init__(self, lp: LinearProgram, params: SolverParams | None = None):
        self.lp = lp
        self.params = params or SolverParams()
        m, n = lp.A.shape
        self.m, self.n = m, n
        row_lo, row_hi = lp.row_bounds()
        lower = np.concatenate([lp.lb, row_lo])
        upper = np.concatenate([lp.ub, row_hi])

        x = np.zeros(n + m)
        status = np.full(n + m, AT_ZERO, dtype=np.int8)
        fin_lo = np.isfinite(lp.lb)
        fin_hi = np.isfinite(lp.ub)
        x[:n] = np.where(fin_lo, lp.lb, np.where(fin_hi, lp.ub, 0.0))
        status[:n] = np.where(fin_lo, AT_LOWER, np.where(fin_hi, AT_UPPER, AT_ZERO))

        activity = lp.A @ x[:n]
        ftol = self.params.feas_tol
        below = activity < row_lo - ftol * (1 + np.abs(row_lo))
        above = activity > row_hi + ftol * (1 + np.abs(row_hi))
        x[n:] = activity
        status[n:] = BASIC
        head = np.arange(n, n + m)

        A_csc = lp.A.tocsc()
        free = np.flatnonzero(~fin_lo & ~fin_hi)
        infeasible = below | above
        for i, j in _triangular_crash(A_csc, free, infeasible, lp.senses == "E"):
            head[i] = j
            status[j] = BASIC
            target = row_lo[i] if below[i] else row_hi[i] if above[i] else row_lo[i]
            x[n + i] = target
            status[n + i] = AT_UPPER if above[i] else AT_LOWER

        ident = sp.identity(m, format="csc")
        self.M = sp.hstack([A_csc, -ident], format="csc")
        self.lower = np.concatenate([lower])
        self.upper = np.concatenate([upper])
        self.x = x
        self.status = status
        self.head = head
        self.factor = _BasisFactor(self.M, self.head)
        self._recompute_basics()

        # a basic logical outside its range is swapped for an artificial on the
        # same row; the columns are parallel so the other basics keep their values
        xb = self.x[head]
        lo_b, hi_b = self.lower[head], self.upper[head]
        bad_pos = np.flatnonzero(
            (head >= n)
            & ((xb < lo_b - ftol * (1 + np.abs(lo_b))) | (xb > hi_b + ftol * (1 + np.abs(hi_b)))))
        n_art = len(bad_pos)
        art_rows = head[bad_pos] - n
        art_signs = np.zeros(n_art)
        art_vals = np.zeros(n_art)
        for k, pos in enumerate(bad_pos):
            j = head[pos]
            target = lo_b[pos] if xb[pos] < lo_b[pos] else hi_b[pos]
            art_signs[k] = 1.0 if target > xb[pos] else -1.0
            art_vals[k] = abs(target - xb[pos])
            self.x[j] = target
            self.status[j] = AT_LOWER if xb[pos] < lo_b[pos] else AT_UPPER
            head[pos] = n + m + k
        art = sp.csc_matrix((art_signs, (art_rows, np.arange(n_art))), shape=(m, n_art))
        self.M = sp.hstack([self.M, art], format="csc")
        self.MT = self.M.T.tocsr()
        self.n_art = n_art
        self.lower = np.concatenate([self.lower, np.zeros(n_art)])
        self.upper = np.concatenate([self.upper, np.full(n_art, np.inf)])
        self.x = np.concatenate([self.x, art_vals])
        self.status = np.concatenate([self.status, np.full(n_art, BASIC, dtype=np.int8)])
        self.head = head
        self.iterations = 0
        limit = self.params.iteration_limit
        self.iteration_limit = limit if limit is not None else 50 * (m + n)
        self._factorize()

    # -- basis maintenance -------------------------------------------------
    def _factorize(self):
        self.factor = _BasisFactor(self.M, self.head)
        self._recompute_basics()

    def _recompute_basics(self):
        xn = self.x.copy()
        xn[self.head] = 0.0
        self.x[self.head] = self.factor.ftran(-(self.M @ xn))

    # -- phases ------------------------------------------------------------
    def run(self) -> LpSolution:
        lp = self.lp
        n, m = self.n, self.m
        if self.n_art:
            cost1 = np.zeros(self.M.shape[1])
            cost1[n + m:] = 1.0
            status, y = self._phase(cost1, phase=1)
            if status == "iteration_limit":
                return self._result("iteration_limit", y)
            infeas = float(self.x[n + m:].sum())
            scale = 1.0 + max(np.abs(lp.b).max(initial=0.0), 1.0)
            if infeas > self.params.feas_tol * scale:
                sol = self._result("infeasible", y)
                sol.farkas = y.copy()
                sol.info["phase1_infeasibility"] = infeas
                return sol
            arts = np.arange(n + m, n + m + self.n_art)
            self.upper[arts] = 0.0
            nonbasic_art = arts[self.status[arts] != BASIC]
            self.x[nonbasic_art] = 0.0
            self.status[nonbasic_art] = AT_LOWER
            self._recompute_basics()
        cost2 = np.zeros(self.M.shape[1])
        cost2[:n] = lp.c
        status, y = self._phase(cost2, phase=2)
        return self._result(status, y)

    def _phase(self, cost: np.ndarray, phase: int):
        p = self.params
        otol = p.opt_tol
        movable = self.upper > self.lower
        bland = p.pricing == "bland"
        stall = 0
        since_refactor = len(self.factor.etas)
        trace = p.trace
        while True:
            y = self.factor.btran(cost[self.head])
            d = cost - self.MT @ y
            st = self.status
            elig = movable & (
                ((st == AT_LOWER) & (d < -otol))
                | ((st == AT_UPPER) & (d > otol))
                | ((st == AT_ZERO) & (np.abs(d) > otol))
            )
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return "optimal", y
            if self.iterations >= self.iteration_limit:
                return "iteration_limit", y
            use_bland = bland or stall >= p.stall_threshold
            if use_bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0

            col = np.zeros(self.m)
            lo_ptr, hi_ptr = self.M.indptr[q], self.M.indptr[q + 1]
            col[self.M.indices[lo_ptr:hi_ptr]] = self.M.data[lo_ptr:hi_ptr]
            alpha = self.factor.ftran(col)
            theta, r, to_upper = self._ratio_test(alpha, direction, q, use_bland)
            if r is None and not np.isfinite(theta):
                if phase == 1:
                    raise SolverError("NUMERICAL_FAILURE", "unbounded ray in phase 1")
                return "unbounded", y

            self.iterations += 1
            step = direction * theta
            self.x[self.head] -= step * alpha
            self.x[q] += step
            if r is None:
                # bound flip of the entering variable, basis unchanged
                if direction > 0:
                    self.x[q], self.status[q] = self.upper[q], AT_UPPER
                else:
                    self.x[q], self.status[q] = self.lower[q], AT_LOWER
                leave = -1
            else:
                leave = int(self.head[r])
                if to_upper:
                    self.x[leave], self.status[leave] = self.upper[leave], AT_UPPER
                else:
                    self.x[leave], self.status[leave] = self.lower[leave], AT_LOWER
                self.head[r] = q
                self.status[q] = BASIC
                self.factor.push(r, alpha)
                since_refactor += 1
            stall = stall + 1 if theta <= _DEGENERATE_STEP else 0
            if trace is not None:
                obj = float(cost @ self.x)
                trace.write(f"{self.iterations} phase={phase} enter={q} leave={leave} "
                            f"theta={theta:.6e} obj={obj:.12e}{' bland' if use_bland else ''}\n")
            if since_refactor >= p.refactor_interval:
                self._refactor_checked()
                since_refactor = 0

    def _refactor_checked(self):
        try:
            self._factorize()
        except SolverError:
            raise SolverError("NUMERICAL_FAILURE",
                              f"basis became singular after {self.iterations} pivots")

    def _ratio_test(self, alpha, direction, q, bland):
        g = direction * alpha
        xb = self.x[self.head]
        lo = self.lower[self.head]
        hi = self.upper[self.head]
        ratios = np.full(self.m, np.inf)
        dec = g > _PIVOT_TOL
        inc = g < -_PIVOT_TOL
        ratios[dec] = (xb[dec] - lo[dec]) / g[dec]
        ratios[inc] = (hi[inc] - xb[inc]) / -g[inc]
        ratios = np.maximum(ratios, 0.0)
        span = self.upper[q] - self.lower[q]

        theta = ratios.min(initial=np.inf)
        if not np.isfinite(theta) and not np.isfinite(span):
            return np.inf, None, False
        if span <= theta:
            return span, None, False
        ties = np.flatnonzero(ratios <= theta + _TIE_TOL * (1 + theta))
        if bland:
            r = int(ties[np.argmin(self.head[ties])])
        else:
            r = int(ties[np.argmax(np.abs(g[ties]))])
        return float(ratios[r]), r, bool(inc[r])

    def _result(self, status: str, y: np.ndarray) -> LpSolution:
        lp = self.lp
        n = self.n
        x = self.x[:n].copy()
        d = lp.c - lp.A.T @ y
        return LpSolution(status=status, primal=x, duals=y.copy(), reduced_costs=d,
                          objective=lp.objective(x), iterations=self.iterations,
                          method="simplex")


def _triangular_crash(A: sp.csc_matrix, free_cols, infeasible, equality):
    """Pair free columns with rows so the crashed basis stays triangular.

    A column may pivot on a row that no earlier column touches, which keeps
    the basis nonsingular. Rows whose start point is infeasible are
    preferred, then equality rows; feasible inequality rows keep their slack.
    """
    nnz = np.diff(A.indptr)
    order = free_cols[np.argsort(nnz[free_cols], kind="stable")]
    touched = np.zeros(A.shape[0], dtype=bool)
    pref = np.where(infeasible, 2, np.where(equality, 1, 0))
    pairs = []
    for j in order:
        lo, hi = A.indptr[j], A.indptr[j + 1]
        if lo == hi:
            continue
        rows = A.indices[lo:hi]
        vals = np.abs(A.data[lo:hi])
        ok = (vals >= 0.1 * vals.max()) & ~touched[rows] & (pref[rows] > 0)
        if not ok.any():
            continue
        cand = np.flatnonzero(ok)
        best = cand[np.lexsort((-vals[cand], -pref[rows[cand]]))[0]]
        pairs.append((int(rows[best]), int(j)))
        touched[rows] = True
    return pairs


def solve_simplex(lp: LinearProgram, params: SolverParams | None = None) -> LpSolution:
    """Solve ``lp`` with the embedded revised simplex (no presolve)."""
    if lp.num_rows == 0:
        return _solve_box(lp)
    return RevisedSimplex(lp, params).run()


def _solve_box(lp: LinearProgram) -> LpSolution:
    c, lb, ub = lp.c, lp.lb, lp.ub
    x = np.where(c > 0, lb, np.where(c < 0, ub, np.where(np.isfinite(lb), lb,
                                                           np.where(np.isfinite(ub), ub, 0.0))))
    status = "unbounded" if not np.all(np.isfinite(x)) else "optimal"
    x = np.where(np.isfinite(x), x, 0.0)
    return LpSolution(status=status, primal=x, duals=np.zeros(0), reduced_costs=c.copy(),
                      objective=lp.objective(x), iterations=0, method="simplex")
