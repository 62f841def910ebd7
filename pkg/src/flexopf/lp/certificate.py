"""Independent optimality / infeasibility certificate checks.

Everything here is recomputed from the program data and the reported primal
and dual vectors; no solver state is consulted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .program import EQ, GE, LE, LinearProgram, LpSolution


class CertificateInvalid(Exception):
    def __init__(self, condition: str, magnitude: float, detail: str = ""):
        super().__init__(f"CERTIFICATE_INVALID({condition}): magnitude {magnitude:.3e} {detail}".strip())
        self.code = "CERTIFICATE_INVALID"
        self.condition = condition
        self.magnitude = magnitude


@dataclass
class CertificateReport:
    status: str
    valid: bool
    primal_infeasibility: float = 0.0
    dual_infeasibility: float = 0.0
    complementarity: float = 0.0
    duality_gap: float = 0.0
    dual_objective: float = float("nan")
    farkas_margin: float = float("nan")
    failures: list = field(default_factory=list)


def _scale(v) -> np.ndarray:
    return 1.0 + np.abs(np.where(np.isfinite(v), v, 0.0))


def check_certificate(lp: LinearProgram, sol: LpSolution, feas_tol: float = 1e-9,
                      dual_tol: float = 1e-9, gap_tol: float = 1e-9,
                      raise_on_failure: bool = True) -> CertificateReport:
    """Verify an :class:`LpSolution` against ``lp`` from first principles.

    For optimal solutions: primal feasibility (relative to ``1 + |bound|``),
    reduced-cost and row-dual sign conditions, complementary slackness, and
    ``|primal - dual objective| <= gap_tol * (1 + |primal|)``. For infeasible
    solutions with a Farkas vector, the separation margin must be positive.
    Raises :class:`CertificateInvalid` on the first violated condition unless
    ``raise_on_failure`` is false.
    """
    lp = getattr(lp, "lp", lp)
    if sol.status == "optimal":
        report = _check_optimal(lp, sol, feas_tol, dual_tol, gap_tol)
    elif sol.status == "infeasible" and sol.farkas is not None:
        report = _check_farkas(lp, sol.farkas)
    else:
        report = CertificateReport(status=sol.status, valid=True)
    if raise_on_failure and report.failures:
        cond, mag = report.failures[0]
        raise CertificateInvalid(cond, mag)
    return report


def _check_optimal(lp, sol, feas_tol, dual_tol, gap_tol) -> CertificateReport:
    x = np.asarray(sol.primal, dtype=float)
    y = np.asarray(sol.duals, dtype=float)
    lo, hi = lp.row_bounds()
    ax = lp.A @ x
    failures = []

    viol_rows = np.maximum(lo - ax, ax - hi)
    viol_rows = np.where(np.isfinite(viol_rows), viol_rows, -np.inf) / _scale(lp.b)
    viol_cols = np.maximum(lp.lb - x, x - lp.ub) / np.maximum(_scale(lp.lb), _scale(lp.ub))
    pinf = float(max(viol_rows.max(initial=0.0), viol_cols.max(initial=0.0), 0.0))
    if pinf > feas_tol:
        failures.append(("primal_feasibility", pinf))

    d = lp.c - lp.A.T @ y
    cscale = 1.0 + float(np.abs(lp.c).max(initial=0.0))
    # row duals: y = d(obj)/d(rhs); <= rows need y <= 0, >= rows need y >= 0
    row_sign = np.zeros_like(y)
    row_sign[lp.senses == LE] = np.maximum(y[lp.senses == LE], 0.0)
    row_sign[lp.senses == GE] = np.maximum(-y[lp.senses == GE], 0.0)
    col_tol = feas_tol * np.maximum(_scale(lp.lb), _scale(lp.ub))
    at_lo = x <= lp.lb + col_tol
    at_hi = x >= lp.ub - col_tol
    # d > 0 only allowed at lower bound, d < 0 only at upper bound
    col_sign = np.where(at_lo, 0.0, np.maximum(d, 0.0)) + np.where(at_hi, 0.0, np.maximum(-d, 0.0))
    dinf = float(max(row_sign.max(initial=0.0), col_sign.max(initial=0.0))) / cscale
    if dinf > dual_tol:
        failures.append(("dual_feasibility", dinf))

    slack = np.where(lp.senses == EQ, 0.0, ax - lp.b)
    comp_rows = np.abs(y * slack)
    dist_lo = np.where(np.isfinite(lp.lb), x - lp.lb, np.inf)
    dist_hi = np.where(np.isfinite(lp.ub), lp.ub - x, np.inf)
    with np.errstate(invalid="ignore"):
        comp_cols = np.where(d > 0, np.abs(d) * dist_lo, np.abs(d) * dist_hi)
    comp_cols = np.where(np.abs(d) <= dual_tol * cscale, 0.0, comp_cols)
    primal_obj = lp.objective(x)
    oscale = 1.0 + abs(primal_obj)
    comp = float(max(comp_rows.max(initial=0.0), comp_cols.max(initial=0.0))) / oscale
    if comp > gap_tol:
        failures.append(("complementary_slackness", comp))

    # dual objective: b'y + sum_j min over [lb, ub] of d_j x_j, with d_j inside
    # the dual tolerance treated as zero
    d_eff = np.where(np.abs(d) <= dual_tol * cscale, 0.0, d)
    bound = np.where(d_eff > 0, lp.lb, np.where(d_eff < 0, lp.ub, 0.0))
    if not np.all(np.isfinite(bound[d_eff != 0])):
        dual_obj = -np.inf
    else:
        dual_obj = float(lp.b @ y + d_eff @ bound + lp.c0)
    gap = abs(primal_obj - dual_obj) / oscale
    if not gap <= gap_tol:
        failures.append(("duality_gap", gap))

    return CertificateReport(status="optimal", valid=not failures, primal_infeasibility=pinf,
                             dual_infeasibility=dinf, complementarity=comp, duality_gap=gap,
                             dual_objective=dual_obj, failures=failures)


def farkas_margin(lp: LinearProgram, ray: np.ndarray) -> float:
    """min over row ranges of y's - max over the box of (A'y)'x.

    Positive means no x in the box can satisfy all rows.
    """
    y = np.asarray(ray, dtype=float)
    lo, hi = lp.row_bounds()
    ymax = float(np.abs(y).max(initial=0.0))
    y = np.where(np.abs(y) <= 1e-11 * ymax, 0.0, y)
    z = lp.A.T @ y
    zscale = 1e-11 * max(ymax, 1.0) * (1.0 + (float(abs(lp.A).max()) if lp.A.nnz else 0.0))
    z = np.where(np.abs(z) <= zscale, 0.0, z)
    with np.errstate(invalid="ignore"):
        row_part = np.where(y > 0, y * lo, np.where(y < 0, y * hi, 0.0))
        box_part = np.where(z > 0, z * lp.ub, np.where(z < 0, z * lp.lb, 0.0))
    return float(row_part.sum() - box_part.sum())


def _check_farkas(lp, ray) -> CertificateReport:
    margin = farkas_margin(lp, ray)
    scale = 1.0 + float(np.abs(ray).max(initial=0.0))
    failures = [] if margin > 1e-9 * scale else [("farkas", margin)]
    return CertificateReport(status="infeasible", valid=not failures,
                             farkas_margin=margin, failures=failures)
