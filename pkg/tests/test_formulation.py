from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import small_network, solve_checked
from flexopf.formulation import (
    BuildOptions, FormulationError, build, check_invariants, extract, lp_cost, pwl_approximate,
)
from flexopf.lp import SolverParams, solve
from flexopf.model import (
    Bus, CostFunction, Generator, Line, Load, Network, ScenarioSet, WindFarm,
)

SIMPLEX = SolverParams(method="simplex")


def test_four_bus_variable_counts(four_bus, four_bus_20):
    prog = build(four_bus, four_bus_20)
    v = prog.variables
    assert v["gen_p"].shape == (1, 20)
    assert v["wind_p"].size == 400
    assert v["load_alpha"].shape == (3, 20, 20)
    assert v["flow"].shape == (3, 20, 20)
    # first-stage variables carry no scenario axis
    assert prog.variable_tag(int(v["gen_p"][0, 4])) == ("gen_p", 1, 5)
    assert prog.row_tag(int(prog.rows["balance"][2, 3, 4])) == ("balance", 3, 3, 5)


def test_inflexible_single_scenario_skips_conservation():
    net, sc = small_network(T=3, flex=0.0, S=1)
    prog = build(net, sc)
    assert prog.rows["conservation"].size == 0


def test_case39_conservation_row_count(case39):
    net, sc = case39
    prog = build(net, sc)
    assert sc.num_scenarios == 100 and net.horizon == 12
    assert prog.rows["conservation"].shape == (3, 100)


def test_slack_angle_fixed_in_every_scenario_period(four_bus, four_bus_20):
    prog = build(four_bus, four_bus_20)
    ang = prog.variables["angle"]
    fixed = (prog.lp.lb[ang] == 0) & (prog.lp.ub[ang] == 0)
    assert fixed.sum(axis=0).tolist() == [[1] * 20] * 20
    assert fixed[0].all()


def test_pwl_one_segment_is_secant():
    pwl = pwl_approximate(CostFunction.quadratic(1.0, 0.0), 0.0, 10.0, 1)
    assert pwl.coefficients == ((0.0, 0.0), (10.0, 100.0))
    assert pwl.slopes().tolist() == [10.0]


def test_pwl_two_segments():
    pwl = pwl_approximate(CostFunction.quadratic(1.0, 0.0), 0.0, 10.0, 2)
    assert pwl.coefficients == ((0.0, 0.0), (5.0, 25.0), (10.0, 100.0))
    assert pwl.slopes().tolist() == [5.0, 15.0]


def test_pwl_max_error_ten_segments():
    pwl = pwl_approximate(CostFunction.quadratic(1.0, 0.0), 0.0, 10.0, 10)
    # independent evaluation: numpy interpolation through the breakpoints
    grid = np.linspace(0.0, 10.0, 100001)
    xs = np.linspace(0.0, 10.0, 11)
    approx = np.interp(grid, xs, xs ** 2)
    assert np.max(approx - grid ** 2) == pytest.approx(0.25, abs=1e-9)
    assert np.max(np.abs(pwl(grid) - approx)) < 1e-12


def test_pwl_rejects_concave():
    with pytest.raises(FormulationError, match="NONCONVEX_COST"):
        pwl_approximate(CostFunction.quadratic(-0.1, 5.0), 0.0, 10.0, 4)


def test_pwl_degenerate_range_uses_tangent():
    line = pwl_approximate(CostFunction.quadratic(0.5, 2.0, 1.0), 4.0, 4.0, 10)
    assert line.kind == "linear"
    assert line(4.0) == pytest.approx(0.5 * 16 + 8 + 1)


@given(st.floats(1e-4, 10), st.floats(0, 100), st.floats(0, 500), st.floats(0.1, 500),
       st.integers(1, 30))
def test_pwl_overestimates_within_bound(c2, c1, p_min, width, k):
    cost = CostFunction.quadratic(c2, c1)
    pwl = pwl_approximate(cost, p_min, p_min + width, k)
    grid = np.linspace(p_min, p_min + width, 1001)
    gap = pwl(grid) - cost(grid)
    scale = 1e-9 * (1 + np.abs(cost(grid)).max())
    assert gap.min() >= -scale
    assert gap.max() <= c2 * (width / k / 2) ** 2 + scale
    assert np.all(np.diff(pwl.slopes()) >= -1e-9 * (1 + np.abs(pwl.slopes()).max()))


def test_zero_c2_becomes_linear():
    assert lp_cost(CostFunction.quadratic(0.0, 7.0, 2.0), 0, 10, 10) == CostFunction.linear(7.0, 2.0)


def one_bus(demand, cost, T=1):
    return Network(buses=(Bus(1, True),), lines=(),
                   generators=(Generator(1, 1, 0.0, 100.0, cost),),
                   loads=(Load(1, 1, (demand,) * T, (1.0,) * T, (1.0,) * T),), horizon=T)


def test_lmp_equals_marginal_cost_interior_dispatch():
    # hand dual: with one unit and fixed demand, d(obj)/d(demand) is the slope
    # of the cost piece holding the set-point
    cost = CostFunction.quadratic(0.1, 5.0)
    net = one_bus(37.0, cost)
    _, sol, rep = solve_checked(net, ScenarioSet.empty(1), params=SIMPLEX)
    xs = np.linspace(0, 100, 11)
    k = np.searchsorted(xs, 37.0) - 1
    slope = (cost(xs[k + 1]) - cost(xs[k])) / (xs[k + 1] - xs[k])
    assert rep.gen_setpoints_mw[0, 0] == pytest.approx(37.0)
    assert rep.lmp[0, 0, 0] == pytest.approx(slope, abs=1e-9)


def test_lmp_linear_cost():
    _, _, rep = solve_checked(one_bus(20.0, CostFunction.linear(13.0, 4.0), T=3),
                              ScenarioSet.empty(3), params=SIMPLEX)
    assert np.allclose(rep.lmp, 13.0)
    assert rep.total_cost == pytest.approx(3 * (13 * 20 + 4))


def test_recomputed_objective_matches_solver(four_bus, four_bus_20):
    net = four_bus.with_flexibility(0.1, four_bus.flexible_load_ids())
    prog, sol, rep = solve_checked(net, four_bus_20)
    assert rep.total_cost == pytest.approx(sol.objective, rel=1e-6, abs=1e-6)
    br = rep.cost_breakdown
    assert br["conventional"] + br["expected_spillage_penalty"] == pytest.approx(rep.total_cost, rel=1e-12)
    # the secant upper-bounds the exact quadratic
    assert br["conventional"] >= br["conventional_exact"] - 1e-9


def test_uniform_lmp_without_limits(four_bus, four_bus_20):
    _, _, rep = solve_checked(four_bus, four_bus_20)
    assert rep.price_uniform.all()
    spread = rep.lmp.max(axis=0) - rep.lmp.min(axis=0)
    assert spread.max() <= 1e-6


def test_binding_line_limit_separates_prices():
    net, sc = small_network(T=2, flex=0.0, S=1, wind_cap=0.0, cycle=False)
    # cheap unit at bus 1 must reach loads through line 1; cap it
    net = replace(net, lines=(replace(net.lines[0], flow_limit_mw=30.0), net.lines[1]))
    _, _, on = solve_checked(net, sc, BuildOptions(enforce_line_limits=True), SIMPLEX)
    _, _, off = solve_checked(net, sc, BuildOptions(enforce_line_limits=False), SIMPLEX)
    assert not on.price_uniform.all() and off.price_uniform.all()
    assert np.abs(on.flows_mw[0]).max() <= 30.0 + 1e-9
    assert on.total_cost > off.total_cost


def test_initial_dispatch_adds_ramp_rows():
    net, sc = small_network(T=3, ramp=5.0, S=1)
    prog = build(net, sc, BuildOptions(initial_dispatch=(50.0, 0.0)))
    assert prog.rows["ramp_up_initial"].size == 2
    _, _, rep = solve_checked(net, sc, BuildOptions(initial_dispatch=(50.0, 0.0)), SIMPLEX)
    assert abs(rep.gen_setpoints_mw[0, 0] - 50.0) <= 5.0 + 1e-9
    with pytest.raises(FormulationError, match="INITIAL_DISPATCH_DIM"):
        build(net, sc, BuildOptions(initial_dispatch=(1.0,)))


def test_scenario_subset_option():
    net, sc = small_network(S=4)
    prog = build(net, sc, BuildOptions(scenario_subset=(0, 2)))
    assert prog.scenarios.num_scenarios == 2
    assert prog.scenarios.probabilities.tolist() == [0.5, 0.5]


def test_extract_requires_optimal():
    net, sc = small_network(S=1)
    net = replace(net, loads=tuple(replace(ld, demand_mw=tuple(10 * d for d in ld.demand_mw))
                                   for ld in net.loads))
    prog = build(net, sc)
    sol = solve(prog, SIMPLEX)
    assert sol.status == "infeasible"
    with pytest.raises(FormulationError, match="STATUS_NOT_OPTIMAL"):
        extract(prog, sol)


def test_zero_demand_flexible_load_keeps_alpha():
    net, sc = small_network(S=1)
    ld = replace(net.loads[0], demand_mw=(0.0,) * net.horizon)
    net = replace(net, loads=(ld, net.loads[1]))
    prog, _, rep = solve_checked(net, sc, params=SIMPLEX)
    assert prog.variables["load_alpha"].shape[0] == 2
    assert prog.rows["conservation"].size == 0


@st.composite
def random_instances(draw):
    T = draw(st.integers(1, 4))
    S = draw(st.integers(1, 3))
    f = draw(st.sampled_from([0.0, 0.1, 0.3]))
    ramp = draw(st.sampled_from([np.inf, 30.0]))
    seed = draw(st.integers(0, 10_000))
    cycle = draw(st.booleans())
    wind = draw(st.sampled_from([0.0, 15.0, 60.0]))
    return small_network(T=T, flex=f, ramp=ramp, wind_cap=wind, S=S, seed=seed, cycle=cycle)


@given(random_instances())
def test_invariants_hold_on_random_instances(inst):
    net, sc = inst
    _, sol, rep = solve_checked(net, sc, params=SIMPLEX)
    assert sol.is_optimal
    res = check_invariants(rep, net, sc)
    assert max(res.values()) <= 1e-6
    assert np.all(rep.spillage_mw >= -1e-9)
    assert np.allclose(rep.load_served_mw, rep.alpha * net.demand_matrix()[:, None, :])


@given(random_instances())
def test_backends_agree_on_random_instances(inst):
    net, sc = inst
    _, a, _ = solve_checked(net, sc, params=SIMPLEX)
    _, b, _ = solve_checked(net, sc, params=SolverParams(method="highs"))
    assert a.objective == pytest.approx(b.objective, rel=1e-8, abs=1e-7)


def test_wind_farm_and_generator_share_bus():
    net = Network(buses=(Bus(1, True), Bus(2)), lines=(Line(1, 1, 2, 10.0),),
                  generators=(Generator(1, 1, 0, 50, CostFunction.linear(20)),),
                  wind_farms=(WindFarm(1, 1, 2.0),),
                  loads=(Load(1, 2, (30.0, 30.0), (1.0, 1.0), (1.0, 1.0)),), horizon=2)
    sc = ScenarioSet(np.array([0.25, 0.75]), np.array([[[10.0, 40.0], [0.0, 20.0]]]), (1,))
    _, _, rep = solve_checked(net, sc, params=SIMPLEX)
    # first-stage dispatch must cover the worst scenario in each period
    assert rep.gen_setpoints_mw[0].tolist() == pytest.approx([30.0, 10.0])
    assert np.allclose(rep.spillage_mw[0], [[10.0, 20.0], [0.0, 0.0]])
