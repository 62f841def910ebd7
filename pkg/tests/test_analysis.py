import csv
import io
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import small_network, solve_checked
from flexopf import presets
from flexopf.analysis import (
    REFERENCE_TABLE, TableRow, fmt, flexibility_sweep, improvement_table, nested_subsets,
    penetration_sweep, records_to_csv, run_point, scenario_robustness, table_to_csv, timing_study,
    TIMING_COLUMNS,
)
from flexopf.lp import SolverParams
from flexopf.model import ScenarioSet

SIMPLEX = SolverParams(method="simplex")


def test_fmt():
    assert fmt(True) == "true"
    assert fmt(3) == "3"
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(float("nan")) == "nan"


def test_flex_sweep_zero_matches_inflexible_solve():
    net, sc = small_network(T=4, S=3, ramp=20.0)
    res = flexibility_sweep(net, sc, [0.0, 0.1, 0.2], params=SIMPLEX)
    _, _, rep = solve_checked(net.with_flexibility(0.0, [1]), sc, params=SIMPLEX)
    assert res.costs[0] == pytest.approx(rep.total_cost, rel=1e-12)
    assert res.improvement()[0] == 0.0
    assert np.all(np.diff(res.costs) <= 1e-9 * res.costs[0])


def test_flex_sweep_adds_baseline_when_missing():
    net, sc = small_network(T=3, S=2)
    res = flexibility_sweep(net, sc, [0.2], params=SIMPLEX)
    assert res.axis == [0.2]
    assert not math.isnan(res.baseline_cost)
    assert res.improvement()[0] >= -1e-12
    with pytest.raises(ValueError):
        flexibility_sweep(net, sc, [0.2, 0.1])


def test_flex_sweep_four_bus_csv(four_bus, four_bus_20):
    res = flexibility_sweep(four_bus, four_bus_20, [0.0, 0.1, 0.2, 0.3])
    rows = list(csv.DictReader(io.StringIO(res.to_csv())))
    assert [r["flexibility"] for r in rows] == ["0", "0.1", "0.2", "0.3"]
    assert "price_t20" in rows[0] and "build_seconds" not in rows[0]
    costs = [float(r["total_cost"]) for r in rows]
    assert costs == sorted(costs, reverse=True)


def test_penetration_zero_equals_no_wind_solve():
    net, sc = small_network(T=3, S=3, wind_cap=50.0)
    res = penetration_sweep(net, sc, [0.0, 0.5, 1.0, 2.0], params=SIMPLEX)
    zero = ScenarioSet(sc.probabilities, np.zeros_like(sc.output_mw), sc.farm_ids)
    _, _, rep = solve_checked(net, zero, params=SIMPLEX)
    assert res.costs[0] == pytest.approx(rep.total_cost, rel=1e-12)
    assert np.all(np.diff(res.spillage) >= -1e-9)
    assert np.all(np.diff(res.costs) <= 1e-9)
    assert [p.extra["penetration"] for p in res.points][0] == 0.0


def test_nested_subsets():
    subs = nested_subsets(100, [5, 20, 50], seed=3)
    assert [len(s) for s in subs] == [5, 20, 50]
    assert set(subs[0]) <= set(subs[1]) <= set(subs[2])
    assert all(np.array_equal(a, b) for a, b in zip(subs, nested_subsets(100, [5, 20, 50], seed=3)))
    with pytest.raises(ValueError):
        nested_subsets(10, [11], 0)


def test_identical_subsets_give_zero_difference():
    net, master = small_network(T=3, S=6)
    res = scenario_robustness(net, master, [3, 3], seed=1, params=SIMPLEX,
                              subsets=[[0, 2, 4], [0, 2, 4]])
    assert res.info["relative_cost_difference"] == 0.0


def test_robustness_four_bus(four_bus):
    master = presets.preset_scenarios("four_bus")
    res = scenario_robustness(four_bus, master, [20, 100], seed=None,
                              subsets=[np.arange(20), np.arange(100)])
    assert abs(res.info["relative_cost_difference"]) < 0.06
    assert all(p.ok for p in res.points)


def test_failed_point_is_recorded():
    net, sc = small_network(S=1)
    big = replace(net, loads=tuple(replace(ld, demand_mw=tuple(10 * d for d in ld.demand_mw))
                                   for ld in net.loads))
    p = run_point(big, sc, 1.0, params=SIMPLEX)
    assert p.status == "infeasible" and not p.ok and math.isnan(p.total_cost)
    bad = run_point(net, ScenarioSet.empty(7), 1.0)
    assert bad.status == "error" and bad.error


def test_table_row_with_zero_flex_has_zero_improvement():
    net, sc = small_network(T=3, S=2)

    def factory(row, S, T, seed):
        return net, sc

    rows = [TableRow("small", (2,), 0.1, (1,), 0.0), TableRow("small", (2,), 0.1, (1,), 0.2)]
    recs = improvement_table(rows, case_factory=factory, params=SIMPLEX)
    assert recs[0]["improvement_pct"] == 0.0
    assert recs[1]["improvement_pct"] >= 0.0
    text = table_to_csv(recs)
    assert text.splitlines()[0].startswith("case,wind_buses")
    assert len(text.splitlines()) == 3


def test_reference_table_rows():
    assert len(REFERENCE_TABLE) == 12
    assert {r.case for r in REFERENCE_TABLE} == {"case57", "case118", "case300"}


def test_spill_cost_irrelevant_without_spillage():
    net, sc = small_network(T=3, S=1, wind_cap=2.0)
    _, _, a = solve_checked(net, sc, params=SIMPLEX)
    assert a.expected_spillage_mw == pytest.approx(0.0, abs=1e-9)
    doubled = replace(net, wind_farms=tuple(replace(w, spillage_cost=2 * w.spillage_cost)
                                            for w in net.wind_farms))
    _, _, b = solve_checked(doubled, sc, params=SIMPLEX)
    assert b.total_cost == pytest.approx(a.total_cost, rel=1e-12)


def test_timing_single_repetition():
    net, sc = small_network()
    rec = timing_study([("small", net, sc)], repetitions=1)[0]
    assert rec["repetitions"] == 1 and rec["status"] == "optimal"
    assert rec["min_seconds"] == rec["mean_seconds"] == rec["max_seconds"]
    assert records_to_csv([rec], TIMING_COLUMNS).count("\n") == 2
    with pytest.raises(ValueError):
        timing_study([], repetitions=0)


def test_small_case_solves_faster_than_large():
    small = presets.table_case("case9", (3,), 0.1, (5,), num_scenarios=2, horizon=2)
    large = presets.table_case("case300", (186,), 0.1, (5,), num_scenarios=2, horizon=2)
    recs = timing_study([("case9", *small), ("case300", *large)], repetitions=3)
    assert all(r["status"] == "optimal" for r in recs)
    assert recs[0]["min_seconds"] < recs[1]["min_seconds"]


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.permutations(range(4)))
def test_scenario_order_does_not_change_cost(seed, perm):
    net, sc = small_network(T=3, S=4, seed=seed)
    p = np.random.default_rng(seed).dirichlet(np.ones(4))
    sc = ScenarioSet(p, sc.output_mw, sc.farm_ids)
    perm = list(perm)
    shuffled = ScenarioSet(p[perm], sc.output_mw[:, perm, :], sc.farm_ids)
    _, _, a = solve_checked(net, sc, params=SIMPLEX)
    _, _, b = solve_checked(net, shuffled, params=SIMPLEX)
    assert b.total_cost == pytest.approx(a.total_cost, rel=1e-9)
