"""Shipped cases, load-profile shape and wind-scenario master set.

Two kinds of preset live here:

* ``imported``: IEEE/MATPOWER case files copied verbatim (BSD licence in
  ``data/matpower/LICENSE``).
* ``reconstructed``: cases whose original data is not published in full. The
  4-bus network and the 39-bus conversion are rebuilt from their published
  summary figures; the numbers they produce are analogues, not the originals.

Wind scenarios come from a seeded synthetic generator (logit-Gaussian AR(1)
process with spatial correlation), stored as normalised capacity factors in
``data/wind_master.csv`` and scaled per case.
"""
from __future__ import annotations

from dataclasses import replace
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .caseio import CaseDocument, parse_matpower, parse_native, parse_scenarios
from .model import Bus, CostFunction, Generator, Line, Load, Network, ScenarioSet, WindFarm

MATPOWER_CASES = ("case9", "case14", "case24_ieee_rts", "case30", "case39", "case57",
                  "case118", "case300")

# Peak-normalised 20-period demand shape. Largest step (0.06) is between
# periods 18 and 19; steps inside the first 12 periods stay at or below 0.03.
PROFILE_SHAPE = (0.80, 0.82, 0.85, 0.88, 0.91, 0.94, 0.96, 0.98, 1.00, 0.99,
                 0.97, 0.95, 0.93, 0.92, 0.90, 0.89, 0.88, 0.86, 0.80, 0.78)

WIND_AREAS = 15
WIND_SCENARIOS = 100
WIND_PERIODS = 20
WIND_SEED = 20150901

# Reconstructed costs for the 8 conventional units of the 39-bus conversion,
# keyed by bus: (c2 $/MW^2h, c1 $/MWh, c0 $/h).
CASE39_COSTS = {
    30: (0.0193, 6.9, 0.0), 31: (0.0111, 3.7, 0.0), 32: (0.0104, 2.8, 0.0),
    33: (0.0088, 4.7, 0.0), 35: (0.0128, 2.8, 0.0), 36: (0.0094, 3.7, 0.0),
    38: (0.0099, 4.8, 0.0), 39: (0.0113, 3.9, 0.0),
}
CASE39_WIND_BUSES = (34, 37)
CASE39_D0 = {"case39_flex": (7, 8, 12), "case39_flex_alt": (4, 8, 20)}


def _data_path(*parts: str):
    return resources.files("flexopf").joinpath("data", *parts)


def read_data(*parts: str) -> str:
    return _data_path(*parts).read_text(encoding="utf-8")


def list_presets() -> list[str]:
    return ["four_bus", *CASE39_D0, *MATPOWER_CASES]


def load_preset(name: str) -> CaseDocument:
    """Parse a shipped case by name (see :func:`list_presets`)."""
    if name in MATPOWER_CASES:
        doc = parse_matpower(read_data("matpower", f"{name}.m"))
        doc.metadata["provenance"] = "imported"
        doc.network.metadata["provenance"] = "imported"
        return doc
    if name == "four_bus" or name in CASE39_D0:
        return parse_native(read_data(f"{name}.json"))
    raise KeyError(f"unknown preset {name!r}; choose from {list_presets()}")


def preset_scenarios(name: str, count: Optional[int] = None) -> ScenarioSet:
    """Shipped scenario file for a native preset; ``count`` keeps the first N."""
    doc = load_preset(name)
    net = doc.network
    fname = "four_bus_scenarios.csv" if name == "four_bus" else "case39_scenarios.csv"
    sc = parse_scenarios(read_data(fname), (len(net.wind_farms), net.horizon),
                         [w.id for w in net.wind_farms])
    if count is not None:
        if not 1 <= count <= sc.num_scenarios:
            raise ValueError(f"count must be in 1..{sc.num_scenarios}")
        sc = sc.subset(range(count))
    return sc


# -- wind master set ----------------------------------------------------------------

def generate_wind_master(seed: int, areas: int = WIND_AREAS, scenarios: int = WIND_SCENARIOS,
                         periods: int = WIND_PERIODS) -> np.ndarray:
    """Capacity factors in (0, 1), shape (areas, scenarios, periods).

    Each area has a smooth forecast path; scenarios perturb its logit with an
    AR(1) process in time whose innovations are correlated across areas.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(periods)
    phase = rng.uniform(0, 2 * np.pi, areas)
    level = rng.uniform(0.3, 0.55, areas)
    forecast = level[:, None] + 0.15 * np.sin(2 * np.pi * t[None, :] / periods + phase[:, None])
    idx = np.arange(areas)
    cov = np.exp(-np.abs(idx[:, None] - idx[None, :]) / 4.0)
    chol = np.linalg.cholesky(cov)
    rho, sigma = 0.85, 0.9
    z = np.zeros((areas, scenarios, periods))
    shock = np.einsum("ij,jsp->isp", chol, rng.standard_normal((areas, scenarios, periods)))
    z[:, :, 0] = shock[:, :, 0]
    for k in range(1, periods):
        z[:, :, k] = rho * z[:, :, k - 1] + np.sqrt(1 - rho ** 2) * shock[:, :, k]
    logit = np.log(forecast / (1 - forecast))[:, None, :] + sigma * z
    return 1.0 / (1.0 + np.exp(-logit))


@lru_cache(maxsize=1)
def wind_master() -> np.ndarray:
    """Shipped master set as a read-only (areas, scenarios, periods) array."""
    sc = parse_scenarios(read_data("wind_master.csv"))
    out = sc.output_mw.copy()
    out.setflags(write=False)
    return out


def wind_scenarios(farm_ids: Sequence[int], capacity_mw: Sequence[float], horizon: int,
                   num_scenarios: int, seed: int, areas: Optional[Sequence[int]] = None) -> ScenarioSet:
    """Draw ``num_scenarios`` joint scenarios from the master set.

    The same scenario indices are used for every farm (joint draws). Farm k
    follows master area ``areas[k]`` (default ``k mod 15``).
    """
    master = wind_master()
    if horizon > master.shape[2]:
        raise ValueError(f"master set covers {master.shape[2]} periods, asked for {horizon}")
    if not 1 <= num_scenarios <= master.shape[1]:
        raise ValueError(f"num_scenarios must be in 1..{master.shape[1]}")
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(master.shape[1], size=num_scenarios, replace=False))
    if areas is None:
        areas = [k % master.shape[0] for k in range(len(farm_ids))]
    cap = np.asarray(capacity_mw, dtype=float)
    out = master[np.asarray(areas, dtype=int)][:, pick, :horizon] * cap[:, None, None]
    p = np.full(num_scenarios, 1.0 / num_scenarios)
    return ScenarioSet(p, out.reshape(len(farm_ids), num_scenarios, horizon), tuple(farm_ids))


def penetration(network: Network, scenarios: ScenarioSet) -> float:
    """Expected wind energy over total demand energy across the horizon."""
    demand = float(network.total_demand().sum())
    return scenarios.expected_energy() / demand if demand > 0 else 0.0


def scale_to_penetration(network: Network, scenarios: ScenarioSet, target: float) -> ScenarioSet:
    current = penetration(network, scenarios)
    if current <= 0:
        raise ValueError("scenario set carries no wind energy")
    return scenarios.scaled(target / current)


# -- network helpers --------------------------------------------------------------

def with_profile(network: Network, shape: Sequence[float]) -> Network:
    """Scale every load's nominal demand by ``shape`` (length becomes the horizon)."""
    T = len(shape)
    loads = []
    for ld in network.loads:
        base = ld.demand_mw[0]
        loads.append(replace(ld, demand_mw=tuple(base * s for s in shape),
                             flex_lo=(ld.flex_lo[0],) * T, flex_hi=(ld.flex_hi[0],) * T))
    return replace(network, loads=tuple(loads), horizon=T)


def with_ramp_fraction(network: Network, fraction: float) -> Network:
    """Ramp limits of ±fraction·p_max on every dispatchable generator."""
    gens = []
    for g in network.generators:
        if g.p_max_mw > g.p_min_mw:
            r = fraction * g.p_max_mw
            g = replace(g, ramp_down_mw=-r, ramp_up_mw=r)
        gens.append(g)
    return replace(network, generators=tuple(gens))


def add_wind_farms(network: Network, buses: Sequence[int], spillage_cost: float = 1.0) -> Network:
    """Farms at ``buses`` next to whatever already sits there; ids continue the sequence."""
    start = max((w.id for w in network.wind_farms), default=0) + 1
    farms = tuple(WindFarm(start + k, b, spillage_cost) for k, b in enumerate(buses))
    return replace(network, wind_farms=network.wind_farms + farms)


def mark_flexible(network: Network, load_ids: Sequence[int]) -> Network:
    """Put loads in D0 with a neutral [1, 1] interval; sweeps widen it later."""
    ids = set(load_ids)
    missing = ids - {ld.id for ld in network.loads}
    if missing:
        raise KeyError(f"no load with id {sorted(missing)}")
    loads = tuple(replace(ld, is_flexible=True) if ld.id in ids else ld for ld in network.loads)
    meta = dict(network.metadata, flexible_load_ids=sorted(ids))
    return replace(network, loads=loads, metadata=meta)


def load_share(network: Network, load_ids: Sequence[int]) -> float:
    dem = network.demand_matrix().sum(axis=1)
    ids = [ld.id for ld in network.loads]
    total = dem.sum()
    return float(sum(dem[ids.index(i)] for i in load_ids) / total) if total else 0.0


def table_case(case: str, wind_buses: Sequence[int], target_penetration: float,
               d0: Sequence[int], num_scenarios: int = 50, horizon: int = 12,
               ramp_fraction: float = 0.10, seed: int = 0,
               farm_capacity_mw: float = 100.0) -> tuple[Network, ScenarioSet]:
    """Imported case set up like the larger-network study.

    Loads follow the first ``horizon`` periods of :data:`PROFILE_SHAPE`, every
    dispatchable unit gets ±ramp_fraction·p_max ramps, farms are added at
    ``wind_buses`` and the joint scenario set is scaled so expected wind energy
    equals ``target_penetration`` of demand energy.
    """
    net = load_preset(case).network
    net = with_profile(net, PROFILE_SHAPE[:horizon])
    net = with_ramp_fraction(net, ramp_fraction)
    net = add_wind_farms(net, wind_buses)
    net = mark_flexible(net, d0)
    ids = [w.id for w in net.wind_farms]
    sc = wind_scenarios(ids, [farm_capacity_mw] * len(ids), horizon, num_scenarios, seed)
    if target_penetration > 0:
        sc = scale_to_penetration(net, sc, target_penetration)
    else:
        sc = sc.scaled(0.0)
    meta = dict(net.metadata, provenance="imported+converted", wind_buses=list(wind_buses),
                target_penetration=target_penetration, scenario_seed=seed)
    return replace(net, metadata=meta), sc


# -- reconstructed cases (used by scripts/make_presets.py) ------------------------

def build_four_bus() -> Network:
    """4-bus, one 100 MW generator and one wind farm at bus 1, 100 MW peak load."""
    T = len(PROFILE_SHAPE)
    buses = (Bus(1, True), Bus(2), Bus(3), Bus(4))
    lines = (Line(1, 1, 2, 10.0), Line(2, 1, 3, 12.5), Line(3, 3, 4, 8.0))
    gens = (Generator(1, 1, 0.0, 100.0, CostFunction.quadratic(0.05, 10.0, 0.0), -10.0, 10.0),)
    farms = (WindFarm(1, 1, 1.0),)
    peaks = {2: 30.0, 3: 45.0, 4: 25.0}
    loads = tuple(Load(b, b, tuple(p * s for s in PROFILE_SHAPE), (1.0,) * T, (1.0,) * T, True)
                  for b, p in peaks.items())
    meta = {"provenance": "reconstructed", "flexible_load_ids": sorted(peaks),
            "comments": ["Reconstructed 4-bus analogue: line data and cost curve are not the "
                         "original archive values."]}
    return Network(buses, lines, gens, farms, loads, 100.0, T, "four_bus", meta)


def build_case39(d0: Sequence[int], horizon: int = 12, ramp_fraction: float = 0.05) -> Network:
    """39-bus conversion: units at buses 34 and 37 become wind farms.

    The remaining eight units get the reconstructed costs in
    :data:`CASE39_COSTS` and ±ramp_fraction·p_max ramps. Lines carry no flow
    limits in the conversion.
    """
    net = parse_matpower(read_data("matpower", "case39.m")).network
    converted = [g for g in net.generators if g.bus in CASE39_WIND_BUSES]
    gens = tuple(replace(g, cost=CostFunction.quadratic(*CASE39_COSTS[g.bus]))
                 for g in net.generators if g.bus not in CASE39_WIND_BUSES)
    # with 34 and 37 converted, the original rateA values make the peak periods
    # infeasible for the inflexible baseline, so flow limits are dropped
    lines = tuple(replace(l, flow_limit_mw=None) for l in net.lines)
    net = replace(net, generators=gens, lines=lines)
    net = with_profile(net, PROFILE_SHAPE[:horizon])
    net = with_ramp_fraction(net, ramp_fraction)
    net = add_wind_farms(net, CASE39_WIND_BUSES)
    net = mark_flexible(net, d0)
    meta = dict(net.metadata, provenance="reconstructed",
                converted_units=[{"generator_id": g.id, "bus": g.bus, "p_max_mw": g.p_max_mw}
                                 for g in converted],
                comments=["IEEE 39-bus import; units at buses 34 and 37 converted to wind farms; "
                          "conventional cost curves reconstructed; flow limits dropped."])
    return replace(net, name="case39_flex", metadata=meta)


def case39_farm_capacity(network: Network) -> list[float]:
    caps = {u["bus"]: u["p_max_mw"] for u in network.metadata.get("converted_units", [])}
    return [caps[w.bus] for w in network.wind_farms]
