"""Two-stage stochastic multiperiod DC optimal power flow with flexible demand."""
__version__ = "0.1.0"

from .caseio import CaseDocument, CaseError, parse_matpower, parse_native, parse_scenarios
from .formulation import BuildOptions, DispatchReport, build, check_invariants, extract, pwl_approximate
from .lp import LinearProgram, LpSolution, SolverError, SolverParams, check_certificate, solve
from .model import (
    Bus, CostFunction, Generator, Line, Load, Network, ScenarioSet, WindFarm,
    feasibility_prescreen, validate,
)
