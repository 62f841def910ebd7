"""Experiment drivers: flexibility and penetration sweeps, scenario robustness,
the larger-network improvement table and solve-time statistics.

Every sweep point is an independent build + solve. A failing point is recorded
with its status and error text and does not stop the sweep. Sampling always
takes an explicit seed.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .formulation import BuildOptions, FormulationError, build, extract
from .lp import SolverError, SolverParams, solve
from .model import Network, ScenarioSet

CSV_DIGITS = 9


def fmt(v) -> str:
    """Locale-independent float formatting with 9 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.{CSV_DIGITS}g}"
    return str(v)


@dataclass
class SweepPoint:
    axis_value: float
    status: str                          # solver status, or "error"
    total_cost: float = math.nan
    expected_spillage_mw: float = math.nan
    system_price: tuple = ()
    build_seconds: float = math.nan
    solve_seconds: float = math.nan
    options: BuildOptions = field(default_factory=BuildOptions)
    seed: Optional[int] = None
    error: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


@dataclass
class SweepResult:
    kind: str                            # flex | penetration | scenarios | timing
    axis_name: str
    points: list
    baseline_cost: float = math.nan      # cost at the sweep's neutral point
    info: dict = field(default_factory=dict)

    @property
    def axis(self) -> list:
        return [p.axis_value for p in self.points]

    @property
    def costs(self) -> np.ndarray:
        return np.array([p.total_cost for p in self.points])

    @property
    def spillage(self) -> np.ndarray:
        return np.array([p.expected_spillage_mw for p in self.points])

    def improvement(self) -> np.ndarray:
        """(baseline − cost) / baseline per point; nan where a solve failed."""
        return (self.baseline_cost - self.costs) / self.baseline_cost

    def to_csv(self, include_timing: bool = False) -> str:
        """Plot-ready CSV. Timing columns are off by default so that reruns
        with the same inputs produce byte-identical files."""
        T = max((len(p.system_price) for p in self.points), default=0)
        head = [self.axis_name, "status", "total_cost", "improvement", "expected_spillage_mw"]
        head += [f"price_t{t + 1}" for t in range(T)]
        extra_keys = sorted({k for p in self.points for k in p.extra})
        head += extra_keys
        if include_timing:
            head += ["build_seconds", "solve_seconds"]
        head += ["error"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(head)
        imp = self.improvement()
        for p, im in zip(self.points, imp):
            prices = list(p.system_price) + [math.nan] * (T - len(p.system_price))
            row = [p.axis_value, p.status, p.total_cost, im, p.expected_spillage_mw, *prices]
            row += [p.extra.get(k, "") for k in extra_keys]
            if include_timing:
                row += [p.build_seconds, p.solve_seconds]
            row += [p.error]
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()


def run_point(network: Network, scenarios: ScenarioSet, axis_value: float,
              options: Optional[BuildOptions] = None, params: Optional[SolverParams] = None,
              seed: Optional[int] = None) -> SweepPoint:
    """Build, solve and extract one instance; failures become a status."""
    options = options or BuildOptions()
    point = SweepPoint(axis_value=axis_value, status="error", options=options, seed=seed)
    try:
        t0 = time.perf_counter()
        prog = build(network, scenarios, options)
        t1 = time.perf_counter()
        sol = solve(prog, params)
        t2 = time.perf_counter()
    except (SolverError, FormulationError, ValueError) as exc:
        point.error = str(exc)
        return point
    point.build_seconds, point.solve_seconds = t1 - t0, t2 - t1
    point.status = sol.status
    if sol.is_optimal:
        rep = extract(prog, sol)
        point.total_cost = rep.total_cost
        point.expected_spillage_mw = rep.expected_spillage_mw
        point.system_price = tuple(float(v) for v in rep.system_price)
        point.extra["uniform_prices"] = bool(rep.price_uniform.all())
    return point


def _run_all(jobs: list, workers: int) -> list:
    """Evaluate ``run_point`` jobs, results ordered by job index."""
    if workers <= 1 or len(jobs) <= 1:
        return [run_point(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_star_run, jobs))


def _star_run(job):
    return run_point(*job)


def flexibility_sweep(network: Network, scenarios: ScenarioSet, flex_levels: Sequence[float],
                      load_ids: Optional[Sequence[int]] = None,
                      options: Optional[BuildOptions] = None, params: Optional[SolverParams] = None,
                      workers: int = 1) -> SweepResult:
    """Solve with F^- = 1 − f, F^+ = 1 + f on the loads in D0 for each f.

    ``load_ids`` defaults to the network's flexible loads. The baseline for
    the improvement metric is f = 0, solved separately if not in the list.
    """
    levels = [float(f) for f in flex_levels]
    if levels != sorted(levels) or any(f < 0 for f in levels):
        raise ValueError("flex_levels must be non-negative and sorted ascending")
    ids = list(load_ids) if load_ids is not None else network.flexible_load_ids()
    if not ids:
        raise ValueError("no flexible loads: pass load_ids or mark loads flexible")
    axis = levels if 0.0 in levels else [0.0] + levels
    jobs = [(network.with_flexibility(f, ids), scenarios, f, options, params) for f in axis]
    pts = _run_all(jobs, workers)
    base = pts[axis.index(0.0)]
    if 0.0 not in levels:
        pts = pts[1:]
    return SweepResult("flex", "flexibility", pts, base.total_cost,
                       {"load_ids": ids, "baseline_status": base.status})


def penetration_sweep(network: Network, scenarios: ScenarioSet, scale_factors: Sequence[float],
                      options: Optional[BuildOptions] = None, params: Optional[SolverParams] = None,
                      workers: int = 1) -> SweepResult:
    """Multiply every scenario output by each factor; baseline is factor 0."""
    factors = [float(k) for k in scale_factors]
    if any(k < 0 for k in factors):
        raise ValueError("scale factors must be non-negative")
    axis = factors if 0.0 in factors else [0.0] + factors
    demand = float(network.total_demand().sum())
    jobs = [(network, scenarios.scaled(k), k, options, params) for k in axis]
    pts = _run_all(jobs, workers)
    for p, k in zip(pts, axis):
        p.extra["penetration"] = k * scenarios.expected_energy() / demand if demand else 0.0
    base = pts[axis.index(0.0)]
    if 0.0 not in factors:
        pts = pts[1:]
    return SweepResult("penetration", "scale_factor", pts, base.total_cost)


def nested_subsets(num_scenarios: int, counts: Sequence[int], seed: int) -> list[np.ndarray]:
    """Prefixes of one seeded permutation, so smaller subsets nest in larger ones."""
    if any(not 1 <= c <= num_scenarios for c in counts):
        raise ValueError(f"scenario counts must be in 1..{num_scenarios}")
    perm = np.random.default_rng(seed).permutation(num_scenarios)
    return [np.sort(perm[:c]) for c in counts]


def scenario_robustness(network: Network, master: ScenarioSet, scenario_counts: Sequence[int],
                        seed: int, options: Optional[BuildOptions] = None,
                        params: Optional[SolverParams] = None, workers: int = 1,
                        subsets: Optional[Sequence[Sequence[int]]] = None) -> SweepResult:
    """Solve on seeded scenario subsets of ``master``.

    ``info["relative_cost_difference"]`` compares the largest count with the
    smallest: (cost_large − cost_small) / cost_small.
    """
    counts = [int(c) for c in scenario_counts]
    if subsets is None:
        subsets = nested_subsets(master.num_scenarios, counts, seed)
    jobs = [(network, master.subset(idx), c, options, params, seed) for c, idx in zip(counts, subsets)]
    pts = _run_all(jobs, workers)
    i_small, i_large = int(np.argmin(counts)), int(np.argmax(counts))
    small = pts[i_small].total_cost
    diff = (pts[i_large].total_cost - small) / small
    return SweepResult("scenarios", "num_scenarios", pts, small,
                       {"relative_cost_difference": diff, "seed": seed})


# -- improvement table -------------------------------------------------------------

@dataclass(frozen=True)
class TableRow:
    case: str
    wind_buses: tuple
    penetration: float                   # fraction, e.g. 0.071
    d0: tuple
    flexibility: float                   # ± fraction
    reference_improvement: float = math.nan   # percent, published value if any


# Rows of the published larger-network table: case, W, penetration, D0, ±flex, improvement %.
REFERENCE_TABLE = (
    TableRow("case57", (3,), 0.071, (8,), 0.10, 1.65),
    TableRow("case57", (3,), 0.071, (12,), 0.10, 4.13),
    TableRow("case57", (12,), 0.207, (8,), 0.10, 2.00),
    TableRow("case57", (12,), 0.207, (9,), 0.20, 3.15),
    TableRow("case118", (10,), 0.055, (80, 116), 0.20, 1.97),
    TableRow("case118", (10,), 0.055, (54,), 0.10, 0.36),
    TableRow("case118", (69, 89), 0.152, (42, 59, 90), 0.20, 4.25),
    TableRow("case118", (69, 89), 0.152, (54,), 0.10, 0.45),
    TableRow("case300", (186, 191), 0.103, (5, 20), 0.20, 1.13),
    TableRow("case300", (186, 191), 0.103, (120, 138, 192), 0.20, 3.03),
    TableRow("case300", (191, 7003, 7049, 7130), 0.219, (10, 44), 0.10, 0.24),
    TableRow("case300", (191, 7003, 7049, 7130), 0.219, (120, 138, 192), 0.20, 3.45),
)

TABLE_COLUMNS = ("case", "wind_buses", "penetration_pct", "d0", "d0_load_share_pct",
                 "flexibility_pct", "improvement_pct", "reference_improvement_pct",
                 "deviation_pct_points", "status", "baseline_cost", "flexible_cost")


def improvement_table(rows: Sequence[TableRow], num_scenarios: int = 50, horizon: int = 12,
                      seed: int = 0, options: Optional[BuildOptions] = None,
                      params: Optional[SolverParams] = None,
                      case_factory: Optional[Callable] = None) -> list[dict]:
    """One improvement figure per row: inflexible vs ±flex on D0.

    ``case_factory(row, num_scenarios, horizon, seed) -> (network, scenarios)``
    defaults to :func:`flexopf.presets.table_case`.
    """
    if case_factory is None:
        from .presets import table_case

        def case_factory(row, S, T, sd):
            return table_case(row.case, row.wind_buses, row.penetration, row.d0,
                              num_scenarios=S, horizon=T, seed=sd)
    from .presets import load_share, penetration

    out = []
    for row in rows:
        rec = {"case": row.case, "wind_buses": " ".join(map(str, row.wind_buses)),
               "d0": " ".join(map(str, row.d0)), "flexibility_pct": 100 * row.flexibility,
               "reference_improvement_pct": row.reference_improvement}
        try:
            net, sc = case_factory(row, num_scenarios, horizon, seed)
        except (KeyError, ValueError) as exc:
            rec.update(status="error", error=str(exc))
            out.append(_fill(rec))
            continue
        rec["penetration_pct"] = 100 * penetration(net, sc)
        rec["d0_load_share_pct"] = 100 * load_share(net, row.d0)
        base = run_point(net.with_flexibility(0.0, row.d0), sc, 0.0, options, params, seed)
        flex = run_point(net.with_flexibility(row.flexibility, row.d0), sc, row.flexibility,
                         options, params, seed)
        rec["baseline_cost"], rec["flexible_cost"] = base.total_cost, flex.total_cost
        if base.ok and flex.ok:
            imp = 100 * (base.total_cost - flex.total_cost) / base.total_cost
            rec.update(status="optimal", improvement_pct=imp,
                       deviation_pct_points=imp - row.reference_improvement)
        else:
            rec["status"] = base.status if not base.ok else flex.status
            rec["error"] = base.error or flex.error
        out.append(_fill(rec))
    return out


def _fill(rec: dict) -> dict:
    for k in TABLE_COLUMNS:
        rec.setdefault(k, math.nan)
    return rec


def table_to_csv(records: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in records:
        w.writerow([fmt(r[k]) for k in TABLE_COLUMNS])
    return buf.getvalue()


# -- timing ------------------------------------------------------------------------

TIMING_COLUMNS = ("case", "buses", "generators", "num_scenarios", "horizon", "rows", "cols",
                  "repetitions", "status", "min_seconds", "mean_seconds", "max_seconds")


def timing_study(cases: Sequence[tuple[str, Network, ScenarioSet]], repetitions: int = 3,
                 options: Optional[BuildOptions] = None,
                 params: Optional[SolverParams] = None) -> list[dict]:
    """Min/mean/max build+solve wall time per case over ``repetitions`` runs."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    options = options or BuildOptions()
    out = []
    for name, net, sc in cases:
        times, status, shape = [], "optimal", (0, 0)
        for _ in range(repetitions):
            t0 = time.perf_counter()
            try:
                prog = build(net, sc, options)
                sol = solve(prog, params)
                status = sol.status
            except (SolverError, FormulationError, ValueError) as exc:
                status = f"error: {exc}"
                break
            times.append(time.perf_counter() - t0)
            shape = (prog.lp.num_rows, prog.lp.num_cols)
        t = np.array(times) if times else np.array([math.nan])
        out.append({"case": name, "buses": len(net.buses), "generators": len(net.generators),
                    "num_scenarios": sc.num_scenarios, "horizon": net.horizon,
                    "rows": shape[0], "cols": shape[1], "repetitions": len(times),
                    "status": status, "min_seconds": float(t.min()),
                    "mean_seconds": float(t.mean()), "max_seconds": float(t.max())})
    return out


def records_to_csv(records: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([fmt(r.get(k, "")) for k in columns])
    return buf.getvalue()


def point_manifest(point: SweepPoint) -> dict:
    d = asdict(point)
    d["options"] = asdict(point.options)
    return d
