from .certificate import CertificateInvalid, CertificateReport, check_certificate, farkas_margin
from .program import EQ, GE, LE, LinearProgram, LpSolution, SolverError, SolverParams
from .solve import choose_method, solve

__all__ = [
    "EQ", "GE", "LE",
    "LinearProgram", "LpSolution", "SolverParams", "SolverError",
    "solve", "choose_method",
    "check_certificate", "CertificateInvalid", "CertificateReport", "farkas_margin",
]
