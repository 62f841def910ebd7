"""Command-line front end: ``flexopf solve | sweep | validate``.

Exit codes: 0 success, 1 input error, 2 infeasible model, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, analysis, presets
from .caseio import CaseError, attach_profile, load_case, parse_scenarios
from .formulation import BuildOptions, FormulationError, build, check_invariants, extract
from .lp import SolverError, SolverParams, check_certificate, solve
from .model import ScenarioSet, feasibility_prescreen, validate

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("flexopf")


class InputError(Exception):
    pass


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


class RunManifest:
    """Inputs (with hashes), options, seed, version and timings of one run."""

    def __init__(self, command: str):
        self.data = {"tool": "flexopf", "version": __version__, "command": command,
                     "python": platform.python_version(), "numpy": np.__version__,
                     "inputs": [], "outputs": {}, "timings": {}}

    def add_input(self, role: str, path: str, raw: Optional[bytes] = None):
        entry = {"role": role, "path": str(path)}
        if raw is not None:
            entry["sha256"] = _sha256(raw)
        self.data["inputs"].append(entry)

    def set(self, key, value):
        self.data[key] = value

    def write(self, out_dir: Path, files: dict):
        for name, text in files.items():
            self.data["outputs"][name] = _sha256(text.encode("utf-8"))
        (out_dir / "manifest.json").write_text(json.dumps(self.data, indent=1, sort_keys=True,
                                                          default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, float) and not np.isfinite(o):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _jsonable(obj):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- input loading ---------------------------------------------------------------

def load_inputs(case: str, scenarios: Optional[str], profile: Optional[str],
                manifest: RunManifest, num_scenarios: Optional[int] = None,
                seed: Optional[int] = None):
    """Network and scenario set from paths or preset names."""
    if Path(case).exists():
        raw = _read_bytes(case)
        manifest.add_input("case", case, raw)
        doc = load_case(case)
    elif case in presets.list_presets():
        manifest.add_input("case", f"preset:{case}")
        doc = presets.load_preset(case)
    else:
        raise InputError(f"case file not found: {case}")
    net = doc.network
    for w in doc.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if profile:
        raw = _read_bytes(profile)
        manifest.add_input("profile", profile, raw)
        net = attach_profile(net, raw.decode("utf-8", errors="strict"))
    farm_ids = [w.id for w in net.wind_farms]
    if scenarios:
        raw = _read_bytes(scenarios)
        manifest.add_input("scenarios", scenarios, raw)
        sc = parse_scenarios(raw.decode("utf-8"), (len(farm_ids), net.horizon), farm_ids)
    elif case in ("four_bus", *presets.CASE39_D0) and not Path(case).exists():
        sc = presets.preset_scenarios(case)
    elif not farm_ids:
        sc = ScenarioSet.empty(net.horizon)
    else:
        raise InputError("network has wind farms: a scenario file is required")
    if num_scenarios is not None and num_scenarios != sc.num_scenarios:
        if seed is None:
            if not 1 <= num_scenarios <= sc.num_scenarios:
                raise InputError(f"--scenarios must be in 1..{sc.num_scenarios}")
            sc = sc.subset(range(num_scenarios))
        else:
            idx = analysis.nested_subsets(sc.num_scenarios, [num_scenarios], seed)[0]
            sc = sc.subset(idx)
    return net, sc


def _options(args) -> BuildOptions:
    return BuildOptions(pwl_segments=args.pwl_segments,
                        enforce_line_limits=(args.line_limits == "on"))


def _params(args) -> SolverParams:
    return SolverParams(feas_tol=args.tol, opt_tol=args.tol, method=args.method)


# -- solve -------------------------------------------------------------------------

def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([analysis.fmt(v) for v in r])
    return buf.getvalue()


def report_files(rep, net, sc, fmt: str) -> dict:
    T, S = net.horizon, sc.num_scenarios
    ids = rep.ids
    dispatch = [(gid, g.bus, t + 1, rep.gen_setpoints_mw[k, t])
                for k, (gid, g) in enumerate(zip(ids["generators"], net.generators)) for t in range(T)]
    lmp = [(b, s + 1, t + 1, rep.lmp[i, s, t])
           for i, b in enumerate(ids["buses"]) for s in range(S) for t in range(T)]
    spill = [(f, s + 1, t + 1, sc.output_mw[k, s, t], rep.wind_used_mw[k, s, t], rep.spillage_mw[k, s, t])
             for k, f in enumerate(ids["wind_farms"]) for s in range(S) for t in range(T)]
    if fmt == "json":
        body = {"dispatch": dispatch, "lmp": lmp, "spillage": spill}
        return {"report.json": json.dumps(_jsonable(body), indent=None) + "\n"}
    return {
        "dispatch.csv": _csv(("generator_id", "bus", "t", "p_mw"), dispatch),
        "lmp.csv": _csv(("bus", "scenario", "t", "lmp"), lmp),
        "spillage.csv": _csv(("farm_id", "scenario", "t", "available_mw", "used_mw", "spillage_mw"), spill),
    }


def cmd_solve(args) -> int:
    manifest = RunManifest("solve")
    out = Path(args.out)
    net, sc = load_inputs(args.case, args.scenario_file, args.profile, manifest,
                          args.scenarios, args.seed)
    if args.flex is not None:
        ids = net.flexible_load_ids()
        if not ids:
            raise InputError("--flex given but the case has no flexible loads")
        net = net.with_flexibility(args.flex, ids)
    issues = validate(net, sc)
    if issues:
        for i in issues:
            print(f"error: {i}", file=sys.stderr)
        return EXIT_INPUT
    for w in feasibility_prescreen(net, sc):
        print(f"warning: {w}", file=sys.stderr)
    options, params = _options(args), _params(args)
    manifest.set("build_options", asdict(options))
    manifest.set("solver_params", {k: v for k, v in asdict(params).items() if k != "trace"})
    manifest.set("seed", args.seed)
    manifest.set("flex", args.flex)
    t0 = time.perf_counter()
    prog = build(net, sc, options)
    t1 = time.perf_counter()
    try:
        sol = solve(prog, params)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    t2 = time.perf_counter()
    manifest.data["timings"] = {"build_seconds": t1 - t0, "solve_seconds": t2 - t1}
    summary = {"case": net.name, "status": sol.status, "method": sol.method,
               "iterations": sol.iterations, "rows": prog.lp.num_rows, "cols": prog.lp.num_cols,
               "num_scenarios": sc.num_scenarios, "horizon": net.horizon}
    files = {}
    code = EXIT_OK
    if sol.is_optimal:
        rep = extract(prog, sol)
        cert = check_certificate(prog, sol, raise_on_failure=False)
        summary.update(total_cost=rep.total_cost, cost_breakdown=rep.cost_breakdown,
                       expected_spillage_mw=rep.expected_spillage_mw,
                       expected_spillage_energy_mwh=rep.expected_spillage_energy,
                       system_price=rep.system_price, prices_uniform=bool(rep.price_uniform.all()),
                       certificate_valid=cert.valid,
                       invariant_residuals=check_invariants(rep, net, sc))
        files.update(report_files(rep, net, sc, args.format))
    elif sol.status == "infeasible":
        code = EXIT_INFEASIBLE
    else:
        code = EXIT_SOLVER
    files["summary.json"] = json.dumps(_jsonable(summary), indent=1, sort_keys=True) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    manifest.write(out, files)
    print(f"{sol.status}: " + (f"total cost {summary['total_cost']:.9g}" if sol.is_optimal else
                               "no dispatch written") + f" -> {out}")
    return code


# -- sweep -------------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _timing_cases(names, num_scenarios: int, horizon: int, seed: int):
    cases = []
    for name in names:
        if name == "four_bus" or name in presets.CASE39_D0:
            net = presets.load_preset(name).network
            sc = presets.preset_scenarios(name)
            idx = analysis.nested_subsets(sc.num_scenarios, [min(num_scenarios, sc.num_scenarios)], seed)[0]
            cases.append((name, net, sc.subset(idx)))
            continue
        if name not in presets.MATPOWER_CASES:
            raise InputError(f"unknown case {name!r}")
        base = presets.load_preset(name).network
        big = max(base.loads, key=lambda ld: ld.demand_mw[0])
        net, sc = presets.table_case(name, [big.bus], 0.2, [big.id], num_scenarios, horizon, seed=seed)
        cases.append((name, net.with_flexibility(0.1, [big.id]), sc))
    return cases


def cmd_sweep(args) -> int:
    manifest = RunManifest(f"sweep {args.kind}")
    out = Path(args.out)
    options, params = _options(args), _params(args)
    manifest.set("build_options", asdict(options))
    manifest.set("solver_params", {k: v for k, v in asdict(params).items() if k != "trace"})
    manifest.set("seed", args.seed)
    t0 = time.perf_counter()
    if args.kind == "timing":
        names = [n for n in (args.cases or "").split(",") if n]
        if not names:
            raise InputError("sweep timing needs --cases")
        recs = analysis.timing_study(_timing_cases(names, args.scenarios or 50, args.horizon, args.seed),
                                     args.repetitions, options, params)
        text = analysis.records_to_csv(recs, analysis.TIMING_COLUMNS)
        ok = any(r["status"] == "optimal" for r in recs)
        fname = "timing.csv"
    elif args.kind == "table":
        rows = [r for r in analysis.REFERENCE_TABLE if not args.cases or r.case in args.cases.split(",")]
        recs = analysis.improvement_table(rows, args.scenarios or 50, args.horizon, args.seed,
                                          options, params)
        text = analysis.table_to_csv(recs)
        ok = any(r["status"] == "optimal" for r in recs)
        fname = "table.csv"
    else:
        if not args.case:
            raise InputError(f"sweep {args.kind} needs a case")
        net, sc = load_inputs(args.case, args.scenario_file, args.profile, manifest,
                              None if args.kind == "scenarios" else args.scenarios, args.seed)
        if args.kind == "flex":
            loads = [int(v) for v in _floats(args.loads)] if args.loads else None
            res = analysis.flexibility_sweep(net, sc, _floats(args.levels), loads, options, params,
                                             args.workers)
        elif args.kind == "penetration":
            if args.flex is not None:
                net = net.with_flexibility(args.flex, net.flexible_load_ids())
            res = analysis.penetration_sweep(net, sc, _floats(args.factors), options, params, args.workers)
        else:
            if args.seed is None:
                raise InputError("sweep scenarios samples subsets: --seed is required")
            if args.flex is not None:
                net = net.with_flexibility(args.flex, net.flexible_load_ids())
            counts = [int(c) for c in _floats(args.counts)]
            res = analysis.scenario_robustness(net, sc, counts, args.seed, options, params,
                                               args.workers)
            manifest.set("relative_cost_difference", res.info["relative_cost_difference"])
        text = res.to_csv()
        ok = any(p.ok for p in res.points)
        fname = f"sweep_{args.kind}.csv"
        manifest.data["timings"]["points"] = [
            {"axis": p.axis_value, "build_seconds": p.build_seconds, "solve_seconds": p.solve_seconds}
            for p in res.points]
    manifest.data["timings"]["total_seconds"] = time.perf_counter() - t0
    out.mkdir(parents=True, exist_ok=True)
    (out / fname).write_text(text)
    manifest.write(out, {fname: text})
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_SOLVER


# -- validate ----------------------------------------------------------------------

def cmd_validate(args) -> int:
    manifest = RunManifest("validate")
    net, sc = load_inputs(args.case, args.scenario_file, args.profile, manifest)
    issues = validate(net, sc)
    for i in issues:
        print(f"error: {i}")
    for w in feasibility_prescreen(net, sc):
        print(f"warning: {w}")
    if not issues:
        print(f"ok: {net.name or args.case} ({len(net.buses)} buses, horizon {net.horizon}, "
              f"{sc.num_scenarios} scenarios)")
    return EXIT_INPUT if issues else EXIT_OK


# -- argument parsing --------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--profile", help="load-profile CSV to attach to the case")
    p.add_argument("--pwl-segments", type=int, default=10, help="secant segments per quadratic cost")
    p.add_argument("--line-limits", choices=("on", "off"), default="on")
    p.add_argument("--tol", type=float, default=1e-9, help="solver feasibility/optimality tolerance")
    p.add_argument("--method", choices=("auto", "simplex", "highs"), default="auto")
    p.add_argument("--seed", type=int, default=None, help="seed for any scenario sampling")
    p.add_argument("--scenarios", type=int, default=None, metavar="N", help="number of scenarios to use")
    p.add_argument("--flex", type=float, default=None, help="apply ±FLEX to the flexible loads")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flexopf", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"flexopf {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one case")
    p.add_argument("case", help="case file (.m or .json) or preset name")
    p.add_argument("scenario_file", nargs="?", help="scenario CSV")
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("kind", choices=("flex", "penetration", "scenarios", "timing", "table"))
    p.add_argument("case", nargs="?", help="case file or preset (flex/penetration/scenarios)")
    p.add_argument("scenario_file", nargs="?", help="scenario CSV")
    p.add_argument("--levels", default="0,0.1,0.2,0.3", help="flex levels, comma-separated")
    p.add_argument("--loads", default=None, help="flexible load ids (default: case D0)")
    p.add_argument("--factors", default="0,0.25,0.5,0.75,1,1.25,1.5", help="wind scale factors")
    p.add_argument("--counts", default="20,100", help="scenario counts")
    p.add_argument("--cases", default=None, help="comma-separated case names (timing/table)")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--horizon", type=int, default=12)
    p.add_argument("--workers", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a case and scenario file")
    p.add_argument("case")
    p.add_argument("scenario_file", nargs="?")
    p.add_argument("--profile")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CaseError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, UnicodeDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FormulationError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
