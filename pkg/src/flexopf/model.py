"""Network, scenario and cost types plus structural validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

LINEAR, QUADRATIC, PIECEWISE = "linear", "quadratic", "piecewise-linear"


@dataclass(frozen=True)
class Issue:
    """A validation violation or a prescreen warning."""

    code: str
    message: str
    path: str = ""

    def __str__(self):
        where = f" [{self.path}]" if self.path else ""
        return f"{self.code}{where}: {self.message}"


@dataclass(frozen=True)
class CostFunction:
    """Generator cost in $/h as a function of output in MW.

    ``coefficients`` is ``(c1, c0)`` for linear, ``(c2, c1, c0)`` for
    quadratic, and a tuple of ``(mw, cost)`` breakpoints for piecewise-linear.
    """

    kind: str
    coefficients: tuple

    @classmethod
    def linear(cls, c1: float, c0: float = 0.0) -> "CostFunction":
        return cls(LINEAR, (float(c1), float(c0)))

    @classmethod
    def quadratic(cls, c2: float, c1: float, c0: float = 0.0) -> "CostFunction":
        return cls(QUADRATIC, (float(c2), float(c1), float(c0)))

    @classmethod
    def piecewise(cls, points: Sequence[tuple[float, float]]) -> "CostFunction":
        return cls(PIECEWISE, tuple((float(x), float(y)) for x, y in points))

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == LINEAR:
            c1, c0 = self.coefficients
            return c1 * p + c0
        if self.kind == QUADRATIC:
            c2, c1, c0 = self.coefficients
            return (c2 * p + c1) * p + c0
        xs, ys = self.breakpoints()
        # linear extrapolation with the end slopes outside the breakpoint range
        out = np.interp(p, xs, ys)
        if len(xs) >= 2:
            lo_slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
            hi_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
            out = np.where(p < xs[0], ys[0] + lo_slope * (p - xs[0]), out)
            out = np.where(p > xs[-1], ys[-1] + hi_slope * (p - xs[-1]), out)
        return out

    def breakpoints(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(self.coefficients, dtype=float).reshape(-1, 2)
        return pts[:, 0], pts[:, 1]

    def slopes(self) -> np.ndarray:
        xs, ys = self.breakpoints()
        return np.diff(ys) / np.diff(xs)

    def problems(self, p_min: float, p_max: float) -> list[str]:
        """Reasons this cost is not convex and non-decreasing on [p_min, p_max]."""
        out = []
        if self.kind == LINEAR:
            if len(self.coefficients) != 2:
                out.append("linear cost needs (c1, c0)")
            elif self.coefficients[0] < 0:
                out.append("linear cost slope is negative")
        elif self.kind == QUADRATIC:
            if len(self.coefficients) != 3:
                out.append("quadratic cost needs (c2, c1, c0)")
            else:
                c2, c1, _ = self.coefficients
                if c2 < 0:
                    out.append("quadratic coefficient c2 < 0 (non-convex)")
                elif 2 * c2 * p_min + c1 < -1e-12:
                    out.append("cost decreases at p_min")
        elif self.kind == PIECEWISE:
            if len(self.coefficients) < 2:
                out.append("piecewise cost needs at least two breakpoints")
                return out
            xs, _ = self.breakpoints()
            if np.any(np.diff(xs) <= 0):
                out.append("breakpoints not strictly increasing in MW")
                return out
            s = self.slopes()
            if np.any(np.diff(s) < -1e-12):
                out.append("piecewise slopes decrease (non-convex)")
            if s[0] < -1e-12:
                out.append("piecewise cost decreases")
        else:
            out.append(f"unknown cost kind {self.kind!r}")
        return out


@dataclass(frozen=True)
class Bus:
    id: int
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance_pu: float
    tap_ratio: float = 1.0
    flow_limit_mw: Optional[float] = None


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min_mw: float
    p_max_mw: float
    cost: CostFunction
    ramp_down_mw: float = -math.inf
    ramp_up_mw: float = math.inf


@dataclass(frozen=True)
class WindFarm:
    id: int
    bus: int
    spillage_cost: float = 1.0


@dataclass(frozen=True)
class Load:
    id: int
    bus: int
    demand_mw: tuple
    flex_lo: tuple
    flex_hi: tuple
    is_flexible: bool = False

    @classmethod
    def flat(cls, id: int, bus: int, demand_mw: float, horizon: int = 1) -> "Load":
        return cls(id, bus, (float(demand_mw),) * horizon, (1.0,) * horizon, (1.0,) * horizon)

    def with_flexibility(self, f: float) -> "Load":
        """Uniform ±f interval; f == 0 makes the load inflexible."""
        T = len(self.demand_mw)
        if f == 0:
            return replace(self, flex_lo=(1.0,) * T, flex_hi=(1.0,) * T, is_flexible=False)
        return replace(self, flex_lo=(1.0 - f,) * T, flex_hi=(1.0 + f,) * T, is_flexible=True)


@dataclass(frozen=True)
class ScenarioSet:
    """Joint wind trajectories: ``output_mw[w, s, t]`` with one probability per s."""

    probabilities: np.ndarray
    output_mw: np.ndarray
    farm_ids: tuple = ()

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        out = np.array(self.output_mw, dtype=float)
        if out.ndim != 3:
            raise ValueError("output_mw must be indexed (farm, scenario, period)")
        p.setflags(write=False)
        out.setflags(write=False)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "output_mw", out)
        object.__setattr__(self, "farm_ids", tuple(int(i) for i in self.farm_ids))

    @property
    def num_scenarios(self) -> int:
        return len(self.probabilities)

    @property
    def num_farms(self) -> int:
        return self.output_mw.shape[0]

    @property
    def horizon(self) -> int:
        return self.output_mw.shape[2]

    @classmethod
    def empty(cls, horizon: int) -> "ScenarioSet":
        return cls(np.ones(1), np.zeros((0, 1, horizon)), ())

    def subset(self, indices: Sequence[int]) -> "ScenarioSet":
        """Scenarios ``indices`` with probabilities renormalised."""
        idx = np.asarray(indices, dtype=int)
        p = self.probabilities[idx]
        return ScenarioSet(p / p.sum(), self.output_mw[:, idx, :], self.farm_ids)

    def scaled(self, factor: float) -> "ScenarioSet":
        return ScenarioSet(self.probabilities, self.output_mw * factor, self.farm_ids)

    def expected_energy(self) -> float:
        """Expected wind energy over the horizon, all farms (MWh per period unit)."""
        return float(np.einsum("s,wst->", self.probabilities, self.output_mw))

    def __eq__(self, other):
        if not isinstance(other, ScenarioSet):
            return NotImplemented
        return (self.farm_ids == other.farm_ids
                and np.array_equal(self.probabilities, other.probabilities)
                and np.array_equal(self.output_mw, other.output_mw))

    __hash__ = None


@dataclass(frozen=True)
class Network:
    buses: tuple
    lines: tuple
    generators: tuple
    wind_farms: tuple = ()
    loads: tuple = ()
    base_mva: float = 100.0
    horizon: int = 1
    name: str = ""
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        for name in ("buses", "lines", "generators", "wind_farms", "loads"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def slack_bus(self) -> Optional[int]:
        slack = [b.id for b in self.buses if b.is_slack]
        return slack[0] if len(slack) == 1 else None

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def demand_matrix(self) -> np.ndarray:
        """(loads, T) nominal demand."""
        if not self.loads:
            return np.zeros((0, self.horizon))
        return np.array([ld.demand_mw for ld in self.loads], dtype=float)

    def total_demand(self) -> np.ndarray:
        return self.demand_matrix().sum(axis=0)

    def with_flexibility(self, f: float, load_ids=None) -> "Network":
        """Apply ±f to loads in ``load_ids`` (default: currently flexible loads)."""
        if load_ids is None:
            load_ids = {ld.id for ld in self.loads if ld.is_flexible}
        load_ids = set(load_ids)
        loads = tuple(ld.with_flexibility(f) if ld.id in load_ids else ld for ld in self.loads)
        meta = dict(self.metadata)
        meta["flexible_load_ids"] = sorted(load_ids)
        return replace(self, loads=loads, metadata=meta)

    def flexible_load_ids(self) -> list[int]:
        ids = [ld.id for ld in self.loads if ld.is_flexible]
        return ids or list(self.metadata.get("flexible_load_ids", []))


def designate_slack(network: Network) -> tuple[Network, list[Issue]]:
    """Flag the lowest-id bus with a generator as slack when none is flagged."""
    if any(b.is_slack for b in network.buses):
        return network, []
    gen_buses = sorted({g.bus for g in network.generators})
    candidates = gen_buses or sorted(network.bus_ids)
    if not candidates:
        return network, []
    chosen = candidates[0]
    buses = tuple(replace(b, is_slack=(b.id == chosen)) for b in network.buses)
    warn = Issue("MISSING_SLACK", f"no slack bus flagged; bus {chosen} designated")
    return replace(network, buses=buses), [warn]


def _duplicates(items) -> list:
    seen, dup = set(), []
    for i in items:
        if i in seen:
            dup.append(i)
        seen.add(i)
    return dup


def _connected(bus_ids, lines) -> bool:
    parent = {b: b for b in bus_ids}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for ln in lines:
        if ln.from_bus in parent and ln.to_bus in parent:
            parent[find(ln.from_bus)] = find(ln.to_bus)
    return len({find(b) for b in bus_ids}) <= 1


def validate(network: Network, scenarios: Optional[ScenarioSet] = None) -> list[Issue]:
    """Every invariant breach of ``network`` (and ``scenarios``); [] means valid."""
    v: list[Issue] = []
    T = network.horizon
    if not isinstance(T, int) or T < 1:
        v.append(Issue("BAD_HORIZON", f"horizon length {T!r} must be an integer >= 1"))
        T = 0
    if network.base_mva <= 0 or not math.isfinite(network.base_mva):
        v.append(Issue("BAD_BASE_MVA", f"base_mva {network.base_mva} must be positive"))

    bus_ids = network.bus_ids
    for d in _duplicates(bus_ids):
        v.append(Issue("DUPLICATE_ID", f"bus id {d} repeated", "buses"))
    n_slack = sum(b.is_slack for b in network.buses)
    if n_slack == 0:
        v.append(Issue("NO_SLACK", "no bus is flagged as slack", "buses"))
    elif n_slack > 1:
        v.append(Issue("MULTIPLE_SLACK", f"{n_slack} buses flagged as slack", "buses"))
    known = set(bus_ids)

    for kind, items in (("lines", network.lines), ("generators", network.generators),
                        ("wind_farms", network.wind_farms), ("loads", network.loads)):
        for d in _duplicates([x.id for x in items]):
            v.append(Issue("DUPLICATE_ID", f"{kind[:-1]} id {d} repeated", kind))

    for ln in network.lines:
        path = f"lines[{ln.id}]"
        for end in (ln.from_bus, ln.to_bus):
            if end not in known:
                v.append(Issue("UNKNOWN_BUS", f"line {ln.id} references bus {end}", path))
        if ln.from_bus == ln.to_bus:
            v.append(Issue("LINE_SELF_LOOP", f"line {ln.id} connects bus {ln.from_bus} to itself", path))
        if not (ln.tap_ratio > 0 and math.isfinite(ln.tap_ratio)):
            v.append(Issue("BAD_TAP", f"tap ratio {ln.tap_ratio} must be positive", path))
        if not math.isfinite(ln.susceptance_pu) or ln.susceptance_pu == 0:
            v.append(Issue("BAD_SUSCEPTANCE", f"susceptance {ln.susceptance_pu} must be finite and nonzero", path))
        if ln.flow_limit_mw is not None and not ln.flow_limit_mw > 0:
            v.append(Issue("BAD_FLOW_LIMIT", f"flow limit {ln.flow_limit_mw} must be > 0", path))

    for g in network.generators:
        path = f"generators[{g.id}]"
        if g.bus not in known:
            v.append(Issue("UNKNOWN_BUS", f"generator {g.id} references bus {g.bus}", path))
        if not (0 <= g.p_min_mw <= g.p_max_mw) or not math.isfinite(g.p_max_mw):
            v.append(Issue("GEN_BOUNDS", f"need 0 <= p_min ({g.p_min_mw}) <= p_max ({g.p_max_mw})", path))
        if not (g.ramp_down_mw <= 0 <= g.ramp_up_mw):
            v.append(Issue("RAMP_SIGN", f"need ramp_down ({g.ramp_down_mw}) <= 0 <= ramp_up ({g.ramp_up_mw})", path))
        for msg in g.cost.problems(g.p_min_mw, g.p_max_mw):
            code = "NONCONVEX_COST" if "convex" in msg else "BAD_COST"
            v.append(Issue(code, msg, path))

    for w in network.wind_farms:
        path = f"wind_farms[{w.id}]"
        if w.bus not in known:
            v.append(Issue("UNKNOWN_BUS", f"wind farm {w.id} references bus {w.bus}", path))
        if not w.spillage_cost >= 0:
            v.append(Issue("BAD_SPILL_COST", f"spillage cost {w.spillage_cost} must be >= 0", path))

    for ld in network.loads:
        path = f"loads[{ld.id}]"
        if ld.bus not in known:
            v.append(Issue("UNKNOWN_BUS", f"load {ld.id} references bus {ld.bus}", path))
        lens = {len(ld.demand_mw), len(ld.flex_lo), len(ld.flex_hi)}
        if T and lens != {T}:
            v.append(Issue("HORIZON_MISMATCH", f"load {ld.id} series lengths {sorted(lens)} != horizon {T}", path))
            continue
        dem = np.asarray(ld.demand_mw, dtype=float)
        lo = np.asarray(ld.flex_lo, dtype=float)
        hi = np.asarray(ld.flex_hi, dtype=float)
        if np.any(~np.isfinite(dem)) or np.any(dem < 0):
            v.append(Issue("NEGATIVE_DEMAND", f"load {ld.id} has negative or non-finite demand", path))
        if np.any(lo < 0):
            v.append(Issue("FLEX_NEGATIVE", f"load {ld.id} has flex_lo < 0", path))
        if np.any(lo > hi):
            t = int(np.argmax(lo > hi))
            v.append(Issue("FLEX_INTERVAL_INVERTED",
                           f"load {ld.id} period {t + 1}: flex_lo {lo[t]} > flex_hi {hi[t]}", path))
        if not ld.is_flexible and (np.any(lo != 1) or np.any(hi != 1)):
            v.append(Issue("INFLEXIBLE_NOT_UNIT", f"inflexible load {ld.id} must have flex_lo = flex_hi = 1", path))

    if network.buses and not _connected(bus_ids, network.lines):
        v.append(Issue("DISCONNECTED", "network graph has more than one island", "lines"))

    if scenarios is not None:
        v.extend(_validate_scenarios(network, scenarios))
    return v


def _validate_scenarios(network: Network, sc: ScenarioSet) -> list[Issue]:
    v = []
    p = sc.probabilities
    if p.size == 0:
        v.append(Issue("SCENARIO_DIM", "scenario set is empty", "scenarios"))
        return v
    if np.any(~(p > 0)):
        v.append(Issue("PROB_NONPOSITIVE", "scenario probabilities must be > 0", "scenarios"))
    if abs(p.sum() - 1.0) > 1e-9:
        v.append(Issue("PROB_SUM", f"probabilities sum to {p.sum():.12g}, not 1", "scenarios"))
    W, S, T = sc.output_mw.shape
    if W != len(network.wind_farms) or S != len(p) or T != network.horizon:
        v.append(Issue("SCENARIO_DIM",
                       f"scenario output shape {(W, S, T)} != (farms {len(network.wind_farms)}, "
                       f"scenarios {len(p)}, horizon {network.horizon})", "scenarios"))
    elif sc.farm_ids and list(sc.farm_ids) != [w.id for w in network.wind_farms]:
        v.append(Issue("SCENARIO_DIM", f"scenario farm ids {list(sc.farm_ids)} do not match network "
                       f"{[w.id for w in network.wind_farms]}", "scenarios"))
    if np.any(~np.isfinite(sc.output_mw)) or np.any(sc.output_mw < 0):
        v.append(Issue("NEGATIVE_OUTPUT", "wind output must be finite and >= 0", "scenarios"))
    return v


def feasibility_prescreen(network: Network, scenarios: Optional[ScenarioSet] = None) -> list[Issue]:
    """Cheap advisory checks; silence here does not imply LP feasibility."""
    warnings = []
    dem = network.demand_matrix()
    inflexible = np.array([not ld.is_flexible for ld in network.loads], dtype=bool)
    if network.horizon > 1 and dem.size:
        step = np.diff(dem[inflexible].sum(axis=0))
        up_cap = sum(min(g.ramp_up_mw, g.p_max_mw - g.p_min_mw) for g in network.generators)
        down_cap = sum(min(-g.ramp_down_mw, g.p_max_mw - g.p_min_mw) for g in network.generators)
        if step.size and (step.max() > up_cap + 1e-9 or -step.min() > down_cap + 1e-9):
            t = int(np.argmax(np.abs(step)))
            warnings.append(Issue(
                "RAMP_VS_DEMAND_STEP",
                f"inflexible demand changes by {step[t]:+.6g} MW between periods {t + 1} and {t + 2}; "
                f"fleet ramp capability is +{up_cap:.6g}/-{down_cap:.6g} MW"))
    peak = float(dem.sum(axis=0).max()) if dem.size else 0.0
    capacity = sum(g.p_max_mw for g in network.generators)
    max_wind = 0.0
    if scenarios is not None and scenarios.output_mw.size:
        max_wind = float(scenarios.output_mw.max(axis=1).sum(axis=0).max())
    if peak > capacity + max_wind + 1e-9:
        warnings.append(Issue(
            "CAPACITY_SHORTFALL",
            f"peak demand {peak:.6g} MW exceeds conventional capacity {capacity:.6g} MW "
            f"plus maximum wind {max_wind:.6g} MW"))
    return warnings
