"""Generic bounded-variable LP container and solver result types."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

EQ, LE, GE = "E", "L", "G"


class SolverError(Exception):
    """Structured solver failure carrying a machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass
class LinearProgram:
    """min c'x + c0  s.t.  A x (sense) b,  lb <= x <= ub.

    ``senses`` holds one of ``"E"``, ``"L"``, ``"G"`` per row. Infinite
    bounds are ``-np.inf`` / ``np.inf``.
    """

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    senses: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    c0: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.senses = np.asarray(self.senses, dtype="<U1")
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("variable vectors must match the column count of A")
        if self.b.shape != (m,) or self.senses.shape != (m,):
            raise ValueError("row vectors must match the row count of A")
        if not np.all(np.isin(self.senses, (EQ, LE, GE))):
            raise ValueError("row senses must be 'E', 'L' or 'G'")

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def num_cols(self) -> int:
        return self.A.shape[1]

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows as ranges ``lo <= A x <= hi``."""
        lo = np.where(self.senses == LE, -np.inf, self.b)
        hi = np.where(self.senses == GE, np.inf, self.b)
        return lo, hi

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.c0)

    def scaled(self, factor: float) -> "LinearProgram":
        """Copy with objective multiplied by ``factor`` (constraints shared)."""
        return LinearProgram(self.c * factor, self.A, self.b, self.senses,
                             self.lb, self.ub, self.c0 * factor)


@dataclass
class SolverParams:
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    iteration_limit: Optional[int] = None   # default 50 * (rows + cols)
    stall_threshold: int = 50
    refactor_interval: int = 50
    pricing: str = "dantzig"                # or "bland"
    method: str = "auto"                    # "simplex", "highs" or "auto"
    auto_size_limit: int = 10000            # rows + cols above which "auto" picks highs
    trace: Optional[object] = None          # writable text stream, one line per pivot


@dataclass
class LpSolution:
    status: str                             # optimal | infeasible | unbounded | iteration_limit
    primal: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    objective: float
    iterations: int = 0
    farkas: Optional[np.ndarray] = None     # row multipliers proving infeasibility
    method: str = "simplex"
    info: dict = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"
