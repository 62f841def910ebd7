"""Solver entry point: fixed-variable/empty-row presolve and backend dispatch."""
from __future__ import annotations

import logging

import numpy as np
from scipy.optimize import linprog

from .program import EQ, GE, LE, LinearProgram, LpSolution, SolverError, SolverParams
from .simplex import solve_simplex

log = logging.getLogger(__name__)

_HIGHS_STATUS = {0: "optimal", 1: "iteration_limit", 2: "infeasible", 3: "unbounded"}


def choose_method(lp: LinearProgram, params: SolverParams) -> str:
    if params.method in ("simplex", "highs"):
        return params.method
    if params.method != "auto":
        raise ValueError(f"unknown solver method {params.method!r}")
    size = lp.num_rows + lp.num_cols
    return "simplex" if size <= params.auto_size_limit else "highs"


def solve(lp: LinearProgram, params: SolverParams | None = None) -> LpSolution:
    """Solve a bounded-variable LP.

    Fixed variables and rows left empty by their removal are taken out before
    the backend runs; duals and reduced costs are reported for the full
    program. Raises :class:`SolverError` on persistent numerical failure.
    """
    params = params or SolverParams()
    lp = getattr(lp, "lp", lp)
    if np.any(lp.lb > lp.ub):
        j = int(np.flatnonzero(lp.lb > lp.ub)[0])
        return _trivially_infeasible(lp, f"variable {j} has lb > ub")
    method = choose_method(lp, params)
    if method == "highs":
        sol = _solve_highs(lp, params)
        sol.info["presolve"] = "highs"
        return sol

    fixed = lp.lb == lp.ub
    keep_cols = np.flatnonzero(~fixed)
    xfix = np.where(fixed, lp.lb, 0.0)
    shift = lp.A @ xfix
    A_red = lp.A[:, keep_cols]
    row_nnz = np.diff(A_red.tocsr().indptr)
    keep_rows = np.flatnonzero(row_nnz > 0)
    empty = np.flatnonzero(row_nnz == 0)

    lo, hi = lp.row_bounds()
    tol = params.feas_tol
    for i in empty:
        if shift[i] < lo[i] - tol * (1 + abs(lo[i])) or shift[i] > hi[i] + tol * (1 + abs(hi[i])):
            ray = np.zeros(lp.num_rows)
            ray[i] = 1.0 if shift[i] < lo[i] else -1.0
            sol = _trivially_infeasible(lp, f"row {i} is empty and violated")
            sol.farkas = ray
            return sol

    reduced = LinearProgram(
        c=lp.c[keep_cols],
        A=A_red[keep_rows],
        b=lp.b[keep_rows] - shift[keep_rows],
        senses=lp.senses[keep_rows],
        lb=lp.lb[keep_cols],
        ub=lp.ub[keep_cols],
        c0=lp.c0 + float(lp.c @ xfix),
    )
    inner = solve_simplex(reduced, params)

    x = xfix.copy()
    x[keep_cols] = inner.primal
    y = np.zeros(lp.num_rows)
    if inner.duals.size:
        y[keep_rows] = inner.duals
    farkas = None
    if inner.farkas is not None:
        farkas = np.zeros(lp.num_rows)
        farkas[keep_rows] = inner.farkas
    d = lp.c - lp.A.T @ y
    return LpSolution(status=inner.status, primal=x, duals=y, reduced_costs=d,
                      objective=lp.objective(x), iterations=inner.iterations,
                      farkas=farkas, method="simplex",
                      info={"presolve_removed_cols": int(fixed.sum()),
                            "presolve_removed_rows": int(len(empty))})


def _trivially_infeasible(lp: LinearProgram, why: str) -> LpSolution:
    x = np.clip(np.zeros(lp.num_cols), lp.lb, lp.ub)
    return LpSolution(status="infeasible", primal=x, duals=np.zeros(lp.num_rows),
                      reduced_costs=lp.c.copy(), objective=lp.objective(x),
                      iterations=0, method="presolve", info={"reason": why})


def _solve_highs(lp: LinearProgram, params: SolverParams) -> LpSolution:
    A = lp.A.tocsr()
    ub_rows = np.flatnonzero(lp.senses != EQ)
    eq_rows = np.flatnonzero(lp.senses == EQ)
    sign = np.where(lp.senses[ub_rows] == GE, -1.0, 1.0)
    A_ub = A[ub_rows].multiply(sign[:, None]).tocsr() if ub_rows.size else None
    b_ub = lp.b[ub_rows] * sign if ub_rows.size else None
    A_eq = A[eq_rows] if eq_rows.size else None
    b_eq = lp.b[eq_rows] if eq_rows.size else None
    bounds = np.column_stack([lp.lb, lp.ub])
    options = {
        "primal_feasibility_tolerance": max(params.feas_tol, 1e-10),
        "dual_feasibility_tolerance": max(params.opt_tol, 1e-10),
        "presolve": True,
    }
    if params.iteration_limit is not None:
        options["maxiter"] = params.iteration_limit
    res = linprog(lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs-ds", options=options)
    if res.status == 4:
        raise SolverError("NUMERICAL_FAILURE", f"HiGHS: {res.message}")
    status = _HIGHS_STATUS.get(res.status, "iteration_limit")
    y = np.zeros(lp.num_rows)
    x = np.asarray(res.x, dtype=float) if res.x is not None else np.clip(
        np.zeros(lp.num_cols), lp.lb, lp.ub)
    if status == "optimal":
        if ub_rows.size:
            y[ub_rows] = np.asarray(res.ineqlin.marginals) * sign
        if eq_rows.size:
            y[eq_rows] = np.asarray(res.eqlin.marginals)
    d = lp.c - lp.A.T @ y
    iters = int(getattr(res, "nit", 0) or 0)
    return LpSolution(status=status, primal=x, duals=y, reduced_costs=d,
                      objective=lp.objective(x), iterations=iters, method="highs",
                      info={"message": res.message})


__all__ = ["solve", "choose_method", "SolverError", "SolverParams", "LE", "GE", "EQ"]
