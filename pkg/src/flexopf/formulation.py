"""Two-stage stochastic multiperiod DC-OPF assembled as one sparse LP.

First stage: conventional set-points ``gen_p[g, t]`` shared by all scenarios.
Second stage, per scenario: wind injection, served-load fractions, bus angles
and line flows. Quadratic generator costs enter through a secant
piecewise-linear epigraph so a single LP covers every case.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .lp import EQ, GE, LE, LinearProgram, LpSolution
from .model import LINEAR, PIECEWISE, QUADRATIC, CostFunction, Network, ScenarioSet


class FormulationError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class BuildOptions:
    pwl_segments: int = 10
    enforce_line_limits: bool = True
    initial_dispatch: Optional[tuple] = None      # MW per generator, before period 1
    scenario_subset: Optional[tuple] = None       # scenario indices, renormalised


def pwl_approximate(cost: CostFunction, p_min: float, p_max: float, segments: int) -> CostFunction:
    """Secant piecewise-linear over-estimate of a quadratic cost.

    Breakpoints are equally spaced on [p_min, p_max]; on each segment of width
    h the overshoot is at most ``c2 * (h / 2) ** 2``, reached at the midpoint.
    A degenerate range (p_min == p_max) gives the tangent line at p_min.
    """
    if cost.kind != QUADRATIC:
        raise FormulationError("NOT_QUADRATIC", f"cost kind {cost.kind!r} is not quadratic")
    c2, c1, c0 = cost.coefficients
    if c2 < 0:
        raise FormulationError("NONCONVEX_COST", f"c2 = {c2} < 0")
    if segments < 1:
        raise ValueError("segments must be >= 1")
    if p_max <= p_min:
        slope = 2 * c2 * p_min + c1
        return CostFunction.linear(slope, float(cost(p_min)) - slope * p_min)
    xs = np.linspace(p_min, p_max, segments + 1)
    return CostFunction.piecewise(list(zip(xs.tolist(), cost(xs).tolist())))


def lp_cost(cost: CostFunction, p_min: float, p_max: float, segments: int) -> CostFunction:
    """The cost actually represented in the LP for one generator."""
    if cost.kind == QUADRATIC:
        if cost.coefficients[0] == 0:
            return CostFunction.linear(cost.coefficients[1], cost.coefficients[2])
        return pwl_approximate(cost, p_min, p_max, segments)
    return cost


# -- index bookkeeping -----------------------------------------------------

@dataclass(frozen=True)
class Block:
    name: str
    start: int
    shape: tuple
    labels: tuple          # per-axis physical labels (ids), same length as shape

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    def positions(self) -> np.ndarray:
        return self.start + np.arange(self.size).reshape(self.shape)


class BlockIndex:
    """Bijection between flat positions and (kind, per-axis index) tuples."""

    def __init__(self):
        self.blocks: dict[str, Block] = {}
        self.size = 0

    def add(self, name: str, shape: tuple, labels: tuple) -> np.ndarray:
        block = Block(name, self.size, tuple(int(s) for s in shape), labels)
        self.blocks[name] = block
        self.size += block.size
        return block.positions()

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name].positions()

    def position(self, name: str, *idx: int) -> int:
        block = self.blocks[name]
        return block.start + int(np.ravel_multi_index(idx, block.shape))

    def lookup(self, pos: int) -> tuple:
        """(kind, *axis labels) for a flat position."""
        for block in self.blocks.values():
            if block.start <= pos < block.start + block.size:
                idx = np.unravel_index(pos - block.start, block.shape)
                return (block.name,) + tuple(block.labels[a][i] for a, i in enumerate(idx))
        raise IndexError(pos)

    def kinds(self) -> list[str]:
        return list(self.blocks)


@dataclass
class StochasticProgram:
    lp: LinearProgram
    variables: BlockIndex
    rows: BlockIndex
    network: Network
    scenarios: ScenarioSet
    options: BuildOptions
    lp_costs: tuple                          # cost used in the LP, per generator
    epigraph_gens: tuple                     # generator positions with an epigraph variable
    spill_offset: float = 0.0

    def row_tag(self, i: int) -> tuple:
        return self.rows.lookup(i)

    def variable_tag(self, j: int) -> tuple:
        return self.variables.lookup(j)


class _Assembler:
    def __init__(self, n_rows_hint: int = 0):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, vals):
        rows, cols = np.broadcast_arrays(np.asarray(rows), np.asarray(cols))
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape)
        self.rows.append(rows.ravel())
        self.cols.append(cols.ravel())
        self.vals.append(vals.ravel())

    def matrix(self, m: int, n: int) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((m, n))
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        v = np.concatenate(self.vals)
        return sp.csr_matrix((v, (r, c)), shape=(m, n))


def build(network: Network, scenarios: ScenarioSet, options: BuildOptions | None = None) -> StochasticProgram:
    """Assemble the stochastic multiperiod DC-OPF for a validated network."""
    options = options or BuildOptions()
    if options.scenario_subset is not None:
        scenarios = scenarios.subset(options.scenario_subset)
    T = network.horizon
    S = scenarios.num_scenarios
    gens, farms, loads = network.generators, network.wind_farms, network.loads
    buses, lines = network.buses, network.lines
    G, W, D, B, L = len(gens), len(farms), len(loads), len(buses), len(lines)
    if scenarios.output_mw.shape != (W, S, T):
        raise FormulationError("SCENARIO_DIM", f"scenario output shape {scenarios.output_mw.shape} "
                               f"!= {(W, S, T)}")
    bpos = {b.id: i for i, b in enumerate(buses)}
    prob = scenarios.probabilities
    avail = scenarios.output_mw
    periods = tuple(range(1, T + 1))
    scen = tuple(range(S))

    costs = tuple(lp_cost(g.cost, g.p_min_mw, g.p_max_mw, options.pwl_segments) for g in gens)
    epi = tuple(i for i, c in enumerate(costs) if c.kind == PIECEWISE)

    var = BlockIndex()
    v_gen = var.add("gen_p", (G, T), (tuple(g.id for g in gens), periods))
    v_epi = var.add("cost_epigraph", (len(epi), T), (tuple(gens[i].id for i in epi), periods))
    v_wind = var.add("wind_p", (W, S, T), (tuple(w.id for w in farms), scen, periods))
    v_alpha = var.add("load_alpha", (D, S, T), (tuple(d.id for d in loads), scen, periods))
    v_ang = var.add("angle", (B, S, T), (tuple(b.id for b in buses), scen, periods))
    v_flow = var.add("flow", (L, S, T), (tuple(l.id for l in lines), scen, periods))
    n = var.size

    c = np.zeros(n)
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    c0 = 0.0

    for g, gen in enumerate(gens):
        lb[v_gen[g]] = gen.p_min_mw
        ub[v_gen[g]] = gen.p_max_mw
        cost = costs[g]
        if cost.kind == LINEAR:
            c[v_gen[g]] = cost.coefficients[0]
            c0 += cost.coefficients[1] * T
    for k, g in enumerate(epi):
        c[v_epi[k]] = 1.0
        lb[v_epi[k]] = float(costs[g](gens[g].p_min_mw))

    spill_cost = np.array([w.spillage_cost for w in farms], dtype=float)
    if W:
        lb[v_wind] = 0.0
        ub[v_wind] = avail
        c[v_wind] = -(spill_cost[:, None, None] * prob[None, :, None])
    spill_offset = float(np.einsum("w,s,wst->", spill_cost, prob, avail)) if W else 0.0
    c0 += spill_offset

    demand = network.demand_matrix()
    for d, ld in enumerate(loads):
        lb[v_alpha[d]] = np.asarray(ld.flex_lo, dtype=float)[None, :]
        ub[v_alpha[d]] = np.asarray(ld.flex_hi, dtype=float)[None, :]
        if not ld.is_flexible:
            lb[v_alpha[d]] = 1.0
            ub[v_alpha[d]] = 1.0

    slack = network.slack_bus
    if slack is None:
        raise FormulationError("NO_SLACK", "network has no unique slack bus")
    lb[v_ang[bpos[slack]]] = 0.0
    ub[v_ang[bpos[slack]]] = 0.0

    if options.enforce_line_limits:
        for l, ln in enumerate(lines):
            if ln.flow_limit_mw is not None:
                lb[v_flow[l]] = -ln.flow_limit_mw
                ub[v_flow[l]] = ln.flow_limit_mw

    # -- rows ---------------------------------------------------------------
    rows = BlockIndex()
    asm = _Assembler()
    rhs: list[np.ndarray] = []
    sense: list[np.ndarray] = []

    def emit(block_rows, b_vals, s_val):
        rhs.append(np.broadcast_to(np.asarray(b_vals, dtype=float), block_rows.shape).ravel())
        sense.append(np.full(block_rows.size, s_val))

    r_bal = rows.add("balance", (B, S, T), (tuple(b.id for b in buses), scen, periods))
    for g, gen in enumerate(gens):
        asm.add(r_bal[bpos[gen.bus]], v_gen[g][None, :], 1.0)
    for w, farm in enumerate(farms):
        asm.add(r_bal[bpos[farm.bus]], v_wind[w], 1.0)
    for d, ld in enumerate(loads):
        asm.add(r_bal[bpos[ld.bus]], v_alpha[d], -demand[d][None, :])
    for l, ln in enumerate(lines):
        asm.add(r_bal[bpos[ln.from_bus]], v_flow[l], -1.0)
        asm.add(r_bal[bpos[ln.to_bus]], v_flow[l], 1.0)
    emit(r_bal, 0.0, EQ)

    r_dc = rows.add("dcflow", (L, S, T), (tuple(l.id for l in lines), scen, periods))
    for l, ln in enumerate(lines):
        k = network.base_mva * ln.susceptance_pu / ln.tap_ratio
        asm.add(r_dc[l], v_flow[l], 1.0)
        asm.add(r_dc[l], v_ang[bpos[ln.from_bus]], -k)
        asm.add(r_dc[l], v_ang[bpos[ln.to_bus]], k)
    emit(r_dc, 0.0, EQ)

    flex = [d for d, ld in enumerate(loads) if ld.is_flexible and demand[d].sum() > 0]
    r_con = rows.add("conservation", (len(flex), S), (tuple(loads[d].id for d in flex), scen))
    for k, d in enumerate(flex):
        asm.add(r_con[k][:, None], v_alpha[d], demand[d][None, :])
    emit(r_con, np.array([demand[d].sum() for d in flex])[:, None] if flex else 0.0, EQ)

    up = [g for g, gen in enumerate(gens) if np.isfinite(gen.ramp_up_mw)]
    dn = [g for g, gen in enumerate(gens) if np.isfinite(gen.ramp_down_mw)]
    steps = tuple(range(1, T))
    r_up = rows.add("ramp_up", (len(up), T - 1), (tuple(gens[g].id for g in up), steps))
    for k, g in enumerate(up):
        asm.add(r_up[k], v_gen[g][1:], 1.0)
        asm.add(r_up[k], v_gen[g][:-1], -1.0)
    emit(r_up, np.array([gens[g].ramp_up_mw for g in up])[:, None] if up else 0.0, LE)
    r_dn = rows.add("ramp_down", (len(dn), T - 1), (tuple(gens[g].id for g in dn), steps))
    for k, g in enumerate(dn):
        asm.add(r_dn[k], v_gen[g][1:], 1.0)
        asm.add(r_dn[k], v_gen[g][:-1], -1.0)
    emit(r_dn, np.array([gens[g].ramp_down_mw for g in dn])[:, None] if dn else 0.0, GE)

    if options.initial_dispatch is not None:
        p0 = np.asarray(options.initial_dispatch, dtype=float)
        if p0.shape != (G,):
            raise FormulationError("INITIAL_DISPATCH_DIM", f"need {G} values, got {p0.shape}")
        r_iu = rows.add("ramp_up_initial", (len(up),), (tuple(gens[g].id for g in up),))
        for k, g in enumerate(up):
            asm.add(r_iu[k], v_gen[g][0], 1.0)
        emit(r_iu, np.array([p0[g] + gens[g].ramp_up_mw for g in up]), LE)
        r_id = rows.add("ramp_down_initial", (len(dn),), (tuple(gens[g].id for g in dn),))
        for k, g in enumerate(dn):
            asm.add(r_id[k], v_gen[g][0], 1.0)
        emit(r_id, np.array([p0[g] + gens[g].ramp_down_mw for g in dn]), GE)

    max_seg = max((len(costs[g].coefficients) - 1 for g in epi), default=0)
    r_pwl = rows.add("pwl", (len(epi), T, max_seg),
                     (tuple(gens[g].id for g in epi), periods, tuple(range(max_seg))))
    pwl_rhs = np.zeros((len(epi), T, max_seg))
    pwl_used = np.zeros((len(epi), T, max_seg), dtype=bool)
    for k, g in enumerate(epi):
        xs, ys = costs[g].breakpoints()
        slopes = np.diff(ys) / np.diff(xs)
        for j, m in enumerate(slopes):
            # z - m p >= y_j - m x_j
            asm.add(r_pwl[k, :, j], v_epi[k], 1.0)
            asm.add(r_pwl[k, :, j], v_gen[g], -m)
            pwl_rhs[k, :, j] = ys[j] - m * xs[j]
            pwl_used[k, :, j] = True
    rhs.append(pwl_rhs.ravel())
    # padding rows (generators with fewer segments) are empty 0 >= 0 rows
    sense.append(np.full(pwl_rhs.size, GE))

    m = rows.size
    A = asm.matrix(m, n)
    lp = LinearProgram(c=c, A=A, b=np.concatenate(rhs) if rhs else np.zeros(0),
                       senses=np.concatenate(sense) if sense else np.zeros(0, dtype="<U1"),
                       lb=lb, ub=ub, c0=c0)
    return StochasticProgram(lp=lp, variables=var, rows=rows, network=network, scenarios=scenarios,
                             options=options, lp_costs=costs, epigraph_gens=epi,
                             spill_offset=spill_offset)


# -- extraction --------------------------------------------------------------

@dataclass
class DispatchReport:
    gen_setpoints_mw: np.ndarray        # (G, T)
    wind_used_mw: np.ndarray            # (W, S, T)
    spillage_mw: np.ndarray             # (W, S, T)
    load_served_mw: np.ndarray          # (D, S, T)
    alpha: np.ndarray                   # (D, S, T)
    angles_rad: np.ndarray              # (B, S, T)
    flows_mw: np.ndarray                # (L, S, T)
    lmp: np.ndarray                     # (B, S, T) $/MWh, conditional on scenario
    system_price: np.ndarray            # (T,) expected price
    price_uniform: np.ndarray           # (S, T) bool, LMPs equal across buses
    total_cost: float
    cost_breakdown: dict
    solver_objective: float
    probabilities: np.ndarray
    ids: dict = field(default_factory=dict)

    @property
    def expected_spillage_mw(self) -> float:
        """Expected total spillage averaged over periods (MW)."""
        if self.spillage_mw.size == 0:
            return 0.0
        per_period = np.einsum("s,wst->t", self.probabilities, self.spillage_mw)
        return float(per_period.mean())

    @property
    def expected_spillage_energy(self) -> float:
        if self.spillage_mw.size == 0:
            return 0.0
        return float(np.einsum("s,wst->", self.probabilities, self.spillage_mw))

    def expected_load_mw(self) -> np.ndarray:
        """(D, T) probability-weighted served load."""
        return np.einsum("s,dst->dt", self.probabilities, self.load_served_mw)


def extract(program: StochasticProgram, solution: LpSolution, price_tol: float = 1e-6) -> DispatchReport:
    """Map an optimal LP solution back to physical quantities."""
    if solution.status != "optimal":
        raise FormulationError("STATUS_NOT_OPTIMAL", f"solver status is {solution.status!r}")
    net, sc = program.network, program.scenarios
    x, y = solution.primal, solution.duals
    var, rows = program.variables, program.rows
    gen = x[var["gen_p"]]
    wind = x[var["wind_p"]]
    alpha = x[var["load_alpha"]]
    angles = x[var["angle"]]
    flows = x[var["flow"]]
    avail = sc.output_mw
    spill = avail - wind
    demand = net.demand_matrix()
    served = alpha * demand[:, None, :]
    prob = sc.probabilities

    bal = y[rows["balance"]]
    lmp = bal / prob[None, :, None]
    spread = lmp.max(axis=0) - lmp.min(axis=0) if lmp.size else np.zeros((len(prob), net.horizon))
    uniform = spread <= price_tol * (1 + np.abs(lmp).max(axis=0)) if lmp.size else np.ones_like(spread, bool)
    system_price = np.einsum("s,st->t", prob, lmp.mean(axis=0)) if lmp.size else np.zeros(net.horizon)

    conventional = 0.0
    for g, cost in enumerate(program.lp_costs):
        conventional += float(np.sum(cost(gen[g])))
    true_conventional = sum(float(np.sum(gn.cost(gen[g]))) for g, gn in enumerate(net.generators))
    spill_cost = np.array([w.spillage_cost for w in net.wind_farms], dtype=float)
    spill_penalty = float(np.einsum("w,s,wst->", spill_cost, prob, spill)) if spill.size else 0.0
    total = conventional + spill_penalty
    breakdown = {
        "conventional": conventional,
        "expected_spillage_penalty": spill_penalty,
        "conventional_exact": true_conventional,
    }
    ids = {
        "generators": [g.id for g in net.generators],
        "wind_farms": [w.id for w in net.wind_farms],
        "loads": [d.id for d in net.loads],
        "buses": [b.id for b in net.buses],
        "lines": [l.id for l in net.lines],
    }
    return DispatchReport(gen_setpoints_mw=gen, wind_used_mw=wind, spillage_mw=spill,
                          load_served_mw=served, alpha=alpha, angles_rad=angles, flows_mw=flows,
                          lmp=lmp, system_price=system_price, price_uniform=uniform,
                          total_cost=total, cost_breakdown=breakdown,
                          solver_objective=solution.objective, probabilities=prob, ids=ids)


def check_invariants(report: DispatchReport, network: Network, scenarios: ScenarioSet) -> dict:
    """Worst-case residuals of the physical invariants, from the network data.

    Keys: balance, conservation, wind_lower, wind_upper, gen_bounds, ramp,
    flow_angle, objective. All are non-negative magnitudes (MW or relative $).
    """
    bpos = {b.id: i for i, b in enumerate(network.buses)}
    B = len(network.buses)
    S, T = len(report.probabilities), network.horizon
    inj = np.zeros((B, S, T))
    for g, gen in enumerate(network.generators):
        inj[bpos[gen.bus]] += report.gen_setpoints_mw[g][None, :]
    for w, farm in enumerate(network.wind_farms):
        inj[bpos[farm.bus]] += report.wind_used_mw[w]
    for d, ld in enumerate(network.loads):
        inj[bpos[ld.bus]] -= report.load_served_mw[d]
    for l, ln in enumerate(network.lines):
        inj[bpos[ln.from_bus]] -= report.flows_mw[l]
        inj[bpos[ln.to_bus]] += report.flows_mw[l]
    res = {"balance": float(np.abs(inj).max(initial=0.0))}

    demand = network.demand_matrix()
    cons = 0.0
    for d, ld in enumerate(network.loads):
        if ld.is_flexible:
            err = report.load_served_mw[d].sum(axis=1) - demand[d].sum()
            cons = max(cons, float(np.abs(err).max(initial=0.0)))
    res["conservation"] = cons

    used = report.wind_used_mw
    avail = scenarios.output_mw if used.size else used
    res["wind_lower"] = float(np.maximum(-used, 0).max(initial=0.0))
    res["wind_upper"] = float(np.maximum(used - avail, 0).max(initial=0.0))

    gb, rp = 0.0, 0.0
    for g, gen in enumerate(network.generators):
        p = report.gen_setpoints_mw[g]
        gb = max(gb, float(np.maximum(gen.p_min_mw - p, 0).max()), float(np.maximum(p - gen.p_max_mw, 0).max()))
        if len(p) > 1:
            dp = np.diff(p)
            rp = max(rp, float(np.maximum(dp - gen.ramp_up_mw, 0).max()),
                     float(np.maximum(gen.ramp_down_mw - dp, 0).max()))
    res["gen_bounds"] = gb
    res["ramp"] = rp

    fa = 0.0
    for l, ln in enumerate(network.lines):
        k = network.base_mva * ln.susceptance_pu / ln.tap_ratio
        f = k * (report.angles_rad[bpos[ln.from_bus]] - report.angles_rad[bpos[ln.to_bus]])
        fa = max(fa, float(np.abs(f - report.flows_mw[l]).max(initial=0.0)))
    res["flow_angle"] = fa
    res["objective"] = abs(report.total_cost - report.solver_objective) / (1 + abs(report.solver_objective))
    return res
