from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flexopf.model import (
    Bus, CostFunction, Generator, Line, Load, Network, ScenarioSet, WindFarm, designate_slack,
    feasibility_prescreen, validate,
)


def codes(issues):
    return [i.code for i in issues]


def one_bus(T=2, p_max=100.0, demand=50.0, ramp=np.inf, flexible=False):
    return Network(
        buses=(Bus(1, True),), lines=(),
        generators=(Generator(1, 1, 0.0, p_max, CostFunction.linear(10.0), -ramp, ramp),),
        loads=(Load(1, 1, (demand,) * T, (1.0,) * T, (1.0,) * T, flexible),), horizon=T)


def test_four_bus_with_twenty_scenarios_is_valid(four_bus, four_bus_20):
    assert validate(four_bus, four_bus_20) == []
    assert four_bus_20.num_scenarios == 20 and four_bus.horizon == 20


def test_inverted_flex_interval():
    net = one_bus()
    ld = replace(net.loads[0], flex_lo=(1.2, 1.2), flex_hi=(0.8, 0.8), is_flexible=True)
    assert codes(validate(replace(net, loads=(ld,)))) == ["FLEX_INTERVAL_INVERTED"]


def test_probabilities_not_summing_to_one():
    net = one_bus()
    sc = ScenarioSet(np.array([0.49, 0.49]), np.zeros((0, 2, 2)))
    assert codes(validate(net, sc)) == ["PROB_SUM"]


@pytest.mark.parametrize("mutate, code", [
    (lambda n: replace(n, buses=(Bus(1), Bus(2))), "NO_SLACK"),
    (lambda n: replace(n, buses=(Bus(1, True), Bus(2, True)), lines=(Line(1, 1, 2, 5.0),)), "MULTIPLE_SLACK"),
    (lambda n: replace(n, buses=(Bus(1, True), Bus(1))), "DUPLICATE_ID"),
    (lambda n: replace(n, lines=(Line(1, 1, 7, 5.0),)), "UNKNOWN_BUS"),
    (lambda n: replace(n, lines=(Line(1, 1, 1, 5.0),)), "LINE_SELF_LOOP"),
    (lambda n: replace(n, generators=(replace(n.generators[0], p_min_mw=60.0, p_max_mw=50.0),)), "GEN_BOUNDS"),
    (lambda n: replace(n, generators=(replace(n.generators[0], ramp_down_mw=1.0),)), "RAMP_SIGN"),
    (lambda n: replace(n, generators=(replace(n.generators[0], cost=CostFunction.quadratic(-1, 1)),)), "NONCONVEX_COST"),
    (lambda n: replace(n, wind_farms=(WindFarm(1, 1, -1.0),)), "BAD_SPILL_COST"),
    (lambda n: replace(n, loads=(replace(n.loads[0], demand_mw=(-1.0, 1.0)),)), "NEGATIVE_DEMAND"),
    (lambda n: replace(n, loads=(replace(n.loads[0], flex_lo=(0.9, 0.9)),)), "INFLEXIBLE_NOT_UNIT"),
    (lambda n: replace(n, loads=(replace(n.loads[0], demand_mw=(1.0,)),)), "HORIZON_MISMATCH"),
    (lambda n: replace(n, buses=(Bus(1, True), Bus(2))), "DISCONNECTED"),
])
def test_invariant_violations(mutate, code):
    assert code in codes(validate(mutate(one_bus())))


def test_line_invariants():
    base = replace(one_bus(), buses=(Bus(1, True), Bus(2)))
    for line, code in [(Line(1, 1, 2, 0.0), "BAD_SUSCEPTANCE"), (Line(1, 1, 2, 5.0, 0.0), "BAD_TAP"),
                       (Line(1, 1, 2, 5.0, 1.0, -3.0), "BAD_FLOW_LIMIT")]:
        assert codes(validate(replace(base, lines=(line,)))) == [code]


def test_scenario_dimension_and_sign_checks():
    net = replace(one_bus(), wind_farms=(WindFarm(1, 1),))
    wrong_t = ScenarioSet(np.ones(1), np.zeros((1, 1, 3)), (1,))
    assert "SCENARIO_DIM" in codes(validate(net, wrong_t))
    neg = ScenarioSet(np.ones(1), -np.ones((1, 1, 2)), (1,))
    assert codes(validate(net, neg)) == ["NEGATIVE_OUTPUT"]


def test_pwl_cost_must_be_convex():
    bad = CostFunction.piecewise([(0, 0), (1, 10), (2, 12)])
    net = one_bus()
    net = replace(net, generators=(replace(net.generators[0], p_max_mw=2.0, cost=bad),))
    assert "NONCONVEX_COST" in codes(validate(net))


def test_missing_slack_designates_lowest_generator_bus():
    net = Network(buses=(Bus(3), Bus(5), Bus(9)), lines=(Line(1, 3, 5, 1.0), Line(2, 5, 9, 1.0)),
                  generators=(Generator(1, 9, 0, 10, CostFunction.linear(1)),
                              Generator(2, 5, 0, 10, CostFunction.linear(1))))
    fixed, warn = designate_slack(net)
    assert fixed.slack_bus == 5
    assert codes(warn) == ["MISSING_SLACK"]


def test_prescreen_four_bus_has_no_ramp_warning(four_bus):
    inflexible = four_bus.with_flexibility(0.0, four_bus.flexible_load_ids())
    step = np.diff(inflexible.total_demand())
    assert np.abs(step).max() == pytest.approx(6.0)
    assert int(np.argmax(np.abs(step))) + 1 == 18          # between periods 18 and 19
    assert codes(feasibility_prescreen(inflexible)) == []


def test_prescreen_ramp_shortfall():
    net = one_bus(T=2, ramp=5.0)
    net = replace(net, loads=(Load(1, 1, (50.0, 56.0), (1.0, 1.0), (1.0, 1.0)),))
    assert codes(feasibility_prescreen(net)) == ["RAMP_VS_DEMAND_STEP"]


def test_prescreen_capacity_shortfall():
    net = one_bus(T=1, p_max=100.0, demand=200.0)
    assert codes(feasibility_prescreen(net, ScenarioSet.empty(1))) == ["CAPACITY_SHORTFALL"]


def test_flexible_ramp_step_is_not_flagged():
    net = one_bus(T=2, ramp=5.0)
    ld = Load(1, 1, (50.0, 56.0), (0.9, 0.9), (1.1, 1.1), True)
    assert codes(feasibility_prescreen(replace(net, loads=(ld,)))) == []


@given(st.floats(0.0, 1.0), st.integers(1, 6))
def test_with_flexibility_keeps_invariants(f, T):
    net = one_bus(T=T, flexible=True)
    out = net.with_flexibility(f, [1])
    assert validate(out) == []
    ld = out.loads[0]
    assert ld.is_flexible == (f > 0)
    assert all(lo == pytest.approx(1 - f) for lo in ld.flex_lo)


@given(st.lists(st.tuples(st.integers(1, 6), st.booleans()), min_size=1, max_size=6))
def test_validate_is_pure(entries):
    buses = tuple(Bus(i, s) for i, s in entries)
    net = replace(one_bus(), buses=buses)
    first = validate(net)
    assert first == validate(net)


@given(st.floats(0.01, 5.0), st.floats(0.0, 50.0), st.floats(0.0, 100.0))
def test_quadratic_cost_convexity_check(c2, c1, p_max):
    assert CostFunction.quadratic(c2, c1).problems(0.0, p_max) == []


def test_scenario_set_is_read_only():
    sc = ScenarioSet(np.array([0.5, 0.5]), np.ones((1, 2, 3)), (1,))
    with pytest.raises(ValueError):
        sc.output_mw[0, 0, 0] = 2.0
    sub = sc.subset([1])
    assert sub.probabilities.tolist() == [1.0]
