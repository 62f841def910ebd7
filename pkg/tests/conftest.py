import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from flexopf import presets  # noqa: E402
from flexopf.formulation import build, check_invariants, extract  # noqa: E402
from flexopf.lp import SolverParams, check_certificate, solve  # noqa: E402
from flexopf.model import (  # noqa: E402
    Bus, CostFunction, Generator, Line, Load, Network, ScenarioSet, WindFarm,
)

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str):
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def solve_checked(network, scenarios, options=None, params=None, check=True):
    """Build, solve, certify and extract; returns (program, solution, report)."""
    prog = build(network, scenarios, options)
    sol = solve(prog, params)
    rep = None
    if sol.is_optimal:
        check_certificate(prog, sol)
        rep = extract(prog, sol)
        if check:
            res = check_invariants(rep, network, scenarios)
            assert res["balance"] <= 1e-6, res
            assert res["conservation"] <= 1e-6, res
            assert res["wind_lower"] <= 1e-9 and res["wind_upper"] <= 1e-9, res
            assert res["gen_bounds"] <= 1e-9 and res["ramp"] <= 1e-9, res
            assert res["flow_angle"] <= 1e-6, res
            assert res["objective"] <= 1e-6, res
    return prog, sol, rep


def small_network(T=3, flex=0.2, ramp=np.inf, wind_cap=20.0, S=2, seed=0, cycle=True):
    """3-bus triangle with one quadratic and one linear unit, one farm."""
    rng = np.random.default_rng(seed)
    buses = (Bus(1, True), Bus(2), Bus(3))
    lines = [Line(1, 1, 2, 10.0), Line(2, 2, 3, 8.0)]
    if cycle:
        lines.append(Line(3, 1, 3, 5.0))
    gens = (Generator(1, 1, 0.0, 120.0, CostFunction.quadratic(0.02, 10.0, 5.0), -ramp, ramp),
            Generator(2, 3, 0.0, 60.0, CostFunction.linear(25.0, 0.0), -ramp, ramp))
    farms = (WindFarm(1, 2, 1.0),)
    shape = 0.8 + 0.2 * np.sin(np.arange(T))
    loads = (Load(1, 2, tuple(40 * shape), (1 - flex,) * T, (1 + flex,) * T, flex > 0),
             Load(2, 3, tuple(30 * shape), (1.0,) * T, (1.0,) * T, False))
    net = Network(buses, tuple(lines), gens, farms, loads, 100.0, T, "small")
    sc = ScenarioSet(np.full(S, 1.0 / S), rng.uniform(0, wind_cap, (1, S, T)), (1,))
    return net, sc


@pytest.fixture(scope="session")
def four_bus():
    return presets.load_preset("four_bus").network


@pytest.fixture(scope="session")
def four_bus_20():
    return presets.preset_scenarios("four_bus", 20)


@pytest.fixture(scope="session")
def case39():
    return presets.load_preset("case39_flex").network, presets.preset_scenarios("case39_flex")


@pytest.fixture
def simplex():
    return SolverParams(method="simplex")
