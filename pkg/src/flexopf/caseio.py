"""Readers and writers for case files, scenario CSVs and load-profile CSVs.

Native JSON (``"schema": 1``) is the source-of-truth format: it is the only
one that carries wind farms, flexible loads and the horizon length. MATPOWER
text is imported for the DC quantities only.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import jsonschema
import numpy as np

from .model import (
    LINEAR, PIECEWISE, QUADRATIC, Bus, CostFunction, Generator, Issue, Line, Load, Network,
    ScenarioSet, WindFarm, designate_slack,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class CaseError(Exception):
    """Structured parse failure: ``code`` plus a location ``path``."""

    def __init__(self, code: str, message: str, path: str = ""):
        where = f" at {path}" if path else ""
        super().__init__(f"{code}{where}: {message}")
        self.code = code
        self.message = message
        self.path = path


@dataclass
class CaseDocument:
    source_format: str                     # "matpower" | "native-json"
    network: Network
    metadata: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


# -- MATPOWER ----------------------------------------------------------------

_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;?", re.S)
_SCALAR_RE = re.compile(r"mpc\.baseMVA\s*=\s*([^;\n%]+)")

_MIN_COLS = {"bus": 3, "gen": 10, "branch": 11, "gencost": 4}


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _matrix(body: str, name: str) -> np.ndarray:
    rows = []
    for chunk in re.split(r"[;\n]", body):
        tokens = [t for t in re.split(r"[\s,]+", chunk.strip()) if t]
        if not tokens:
            continue
        try:
            rows.append([float(t) for t in tokens])
        except ValueError as exc:
            raise CaseError("MALFORMED_MATRIX", f"non-numeric entry in mpc.{name}: {exc}",
                            f"mpc.{name}[{len(rows)}]") from None
    if not rows:
        return np.zeros((0, _MIN_COLS.get(name, 0)))
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width and name != "gencost":
            raise CaseError("MALFORMED_MATRIX", f"row has {len(r)} columns, expected {width}",
                            f"mpc.{name}[{i}]")
    if name == "gencost":
        width = max(len(r) for r in rows)
        rows = [r + [0.0] * (width - len(r)) for r in rows]
    arr = np.array(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        i = int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])
        raise CaseError("MALFORMED_MATRIX", "non-finite entry", f"mpc.{name}[{i}]")
    if width < _MIN_COLS.get(name, 0):
        raise CaseError("MALFORMED_MATRIX", f"mpc.{name} has {width} columns, need at least "
                        f"{_MIN_COLS[name]}", f"mpc.{name}")
    return arr


def _gencost(row: np.ndarray, path: str) -> CostFunction:
    model, n = int(row[0]), int(row[3])
    params = row[4:]
    if model == 2:
        if n > 3:
            raise CaseError("UNSUPPORTED_COST_MODEL", f"polynomial of degree {n - 1} > 2", path)
        if n < 0 or len(params) < n:
            raise CaseError("MALFORMED_MATRIX", f"gencost declares {n} coefficients", path)
        coeffs = [0.0] * (3 - n) + list(params[:n])
        c2, c1, c0 = coeffs
        if c2 == 0:
            return CostFunction.linear(c1, c0)
        return CostFunction.quadratic(c2, c1, c0)
    if model == 1:
        if n < 2 or len(params) < 2 * n:
            raise CaseError("MALFORMED_MATRIX", f"piecewise gencost needs {2 * n} values", path)
        pts = params[: 2 * n].reshape(n, 2)
        return CostFunction.piecewise([tuple(p) for p in pts])
    raise CaseError("UNSUPPORTED_COST_MODEL", f"gencost model {model}", path)


def parse_matpower(text: str) -> CaseDocument:
    """Parse the DC-relevant subset of a MATPOWER case file.

    Loads get a length-1 flat profile; attach a profile CSV to extend the
    horizon. Buses with negative Pd become fixed-output zero-cost injections.
    """
    if not isinstance(text, str):
        raise CaseError("MALFORMED_CASE", "case text must be a string")
    clean = _strip_comments(text)
    name_match = re.search(r"function\s+mpc\s*=\s*(\w+)", clean)
    m_base = _SCALAR_RE.search(clean)
    if not m_base:
        raise CaseError("MALFORMED_CASE", "mpc.baseMVA not found", "mpc.baseMVA")
    try:
        base_mva = float(m_base.group(1).strip())
    except ValueError:
        raise CaseError("MALFORMED_CASE", "mpc.baseMVA is not a number", "mpc.baseMVA") from None
    if not (math.isfinite(base_mva) and base_mva > 0):
        raise CaseError("MALFORMED_CASE", f"baseMVA {base_mva} must be positive", "mpc.baseMVA")
    mats = {}
    for m in _MATRIX_RE.finditer(clean):
        key = m.group(1)
        if key in _MIN_COLS:
            mats[key] = _matrix(m.group(2), key)
    for key in ("bus", "gen", "branch", "gencost"):
        if key not in mats:
            raise CaseError("MALFORMED_CASE", f"mpc.{key} matrix not found", f"mpc.{key}")
    bus, gen, branch, gencost = mats["bus"], mats["gen"], mats["branch"], mats["gencost"]
    log.debug("MATPOWER import: angle, voltage and reactive columns are discarded")

    warnings: list[Issue] = []
    buses, loads, fixed = [], [], []
    for i, row in enumerate(bus):
        bid, btype, pd = int(row[0]), int(row[1]), float(row[2])
        if row[0] != bid:
            raise CaseError("MALFORMED_MATRIX", f"bus id {row[0]} is not an integer", f"mpc.bus[{i}]")
        if btype == 4:
            log.debug("bus %d is isolated (type 4) and skipped", bid)
            continue
        buses.append(Bus(bid, is_slack=(btype == 3)))
        if pd > 0:
            loads.append(Load.flat(bid, bid, pd))
        elif pd < 0:
            fixed.append((bid, -pd))
    known = {b.id for b in buses}

    active = [i for i, row in enumerate(gen) if row[7] > 0]
    if gencost.shape[0] < gen.shape[0]:
        raise CaseError("MALFORMED_MATRIX", f"{gencost.shape[0]} gencost rows for {gen.shape[0]} generators",
                        "mpc.gencost")
    generators = []
    for k, i in enumerate(active):
        row = gen[i]
        cost = _gencost(gencost[i], f"mpc.gencost[{i}]")
        generators.append(Generator(id=k + 1, bus=int(row[0]), p_min_mw=float(row[9]),
                                    p_max_mw=float(row[8]), cost=cost))
    next_id = len(generators) + 1
    for bid, p in fixed:
        generators.append(Generator(id=next_id, bus=bid, p_min_mw=p, p_max_mw=p,
                                    cost=CostFunction.linear(0.0, 0.0)))
        next_id += 1

    lines = []
    for i, row in enumerate(branch):
        if row[10] <= 0:
            continue
        x = float(row[3])
        if x == 0:
            raise CaseError("ZERO_REACTANCE", f"branch {int(row[0])}-{int(row[1])} has x = 0",
                            f"mpc.branch[{i}]")
        tap = float(row[8]) or 1.0
        rate = float(row[5])
        lines.append(Line(id=i + 1, from_bus=int(row[0]), to_bus=int(row[1]),
                          susceptance_pu=1.0 / x, tap_ratio=tap,
                          flow_limit_mw=rate if rate > 0 else None))

    name = name_match.group(1) if name_match else ""
    net = Network(buses=tuple(buses), lines=tuple(lines), generators=tuple(generators),
                  wind_farms=(), loads=tuple(loads), base_mva=base_mva, horizon=1, name=name,
                  metadata={"fixed_injection_buses": [b for b, _ in fixed]} if fixed else {})
    net, slack_warn = designate_slack(net)
    warnings.extend(slack_warn)
    for w in slack_warn:
        log.warning("%s", w)
    comments = [ln.strip().lstrip("%").strip() for ln in text.splitlines()
                if ln.strip().startswith("%")][:20]
    meta = {"name": name, "base_mva": base_mva, "comments": comments, "provenance": "imported"}
    return CaseDocument("matpower", net, meta, warnings)


# -- native JSON -----------------------------------------------------------------

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_SERIES = {"type": "array", "items": _NUM, "minItems": 1}

NATIVE_SCHEMA = {
    "type": "object",
    "required": ["schema", "base_mva", "horizon", "buses", "lines", "generators"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "base_mva": _NUM,
        "horizon": {"type": "integer", "minimum": 1},
        "metadata": {"type": "object"},
        "buses": {"type": "array", "items": {
            "type": "object", "required": ["id"],
            "properties": {"id": {"type": "integer"}, "slack": {"type": "boolean"}},
            "additionalProperties": False}},
        "lines": {"type": "array", "items": {
            "type": "object", "required": ["id", "from", "to", "susceptance_pu"],
            "properties": {
                "id": {"type": "integer"}, "from": {"type": "integer"}, "to": {"type": "integer"},
                "susceptance_pu": _NUM, "tap_ratio": _NUM, "flow_limit_mw": _NUM_OR_NULL},
            "additionalProperties": False}},
        "generators": {"type": "array", "items": {
            "type": "object", "required": ["id", "bus", "p_min_mw", "p_max_mw", "cost"],
            "properties": {
                "id": {"type": "integer"}, "bus": {"type": "integer"},
                "p_min_mw": _NUM, "p_max_mw": _NUM,
                "ramp_down_mw": _NUM_OR_NULL, "ramp_up_mw": _NUM_OR_NULL,
                "cost": {"type": "object", "required": ["kind", "coefficients"], "properties": {
                    "kind": {"enum": [LINEAR, QUADRATIC, PIECEWISE]},
                    "coefficients": {"type": "array", "items": {
                        "anyOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}}},
                    "additionalProperties": False}},
            "additionalProperties": False}},
        "wind_farms": {"type": "array", "items": {
            "type": "object", "required": ["id", "bus"],
            "properties": {"id": {"type": "integer"}, "bus": {"type": "integer"},
                           "spillage_cost": _NUM},
            "additionalProperties": False}},
        "loads": {"type": "array", "items": {
            "type": "object", "required": ["id", "bus", "demand_mw"],
            "properties": {"id": {"type": "integer"}, "bus": {"type": "integer"},
                           "demand_mw": _SERIES, "flex_lo": _SERIES, "flex_hi": _SERIES,
                           "flexible": {"type": "boolean"}},
            "additionalProperties": False}},
    },
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft7Validator(NATIVE_SCHEMA)


def _cost_from_json(obj: dict, path: str) -> CostFunction:
    kind, coeffs = obj["kind"], obj["coefficients"]
    nested = [isinstance(c, list) for c in coeffs]
    if kind == PIECEWISE:
        if not all(nested) or len(coeffs) < 2:
            raise CaseError("SCHEMA_VIOLATION", "piecewise cost needs >= 2 [mw, cost] pairs",
                            f"{path}.coefficients")
        return CostFunction.piecewise([tuple(c) for c in coeffs])
    if any(nested):
        raise CaseError("SCHEMA_VIOLATION", f"{kind} cost takes scalar coefficients",
                        f"{path}.coefficients")
    need = 2 if kind == LINEAR else 3
    if len(coeffs) != need:
        raise CaseError("SCHEMA_VIOLATION", f"{kind} cost needs {need} coefficients",
                        f"{path}.coefficients")
    return CostFunction(kind, tuple(float(c) for c in coeffs))


def _num(v, default):
    return default if v is None else float(v)


def parse_native(json_text) -> CaseDocument:
    """Parse a native case. Structural problems raise ``SCHEMA_VIOLATION``.

    Invariant breaches (inverted flexibility intervals, unknown buses...) are
    left to :func:`flexopf.model.validate`.
    """
    try:
        if isinstance(json_text, (bytes, bytearray)):
            json_text = json_text.decode("utf-8")
        doc = json.loads(json_text)
    except (UnicodeDecodeError, json.JSONDecodeError, TypeError, RecursionError) as exc:
        raise CaseError("SCHEMA_VIOLATION", f"not valid JSON: {exc}", "$") from None
    try:
        err = next(iter(sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.absolute_path))), None)
    except RecursionError:
        raise CaseError("SCHEMA_VIOLATION", "document nested too deeply", "$") from None
    if err is not None:
        raise CaseError("SCHEMA_VIOLATION", err.message, err.json_path)

    T = int(doc["horizon"])
    buses = tuple(Bus(int(b["id"]), bool(b.get("slack", False))) for b in doc["buses"])
    lines = tuple(Line(int(l["id"]), int(l["from"]), int(l["to"]), float(l["susceptance_pu"]),
                       float(l.get("tap_ratio", 1.0)),
                       None if l.get("flow_limit_mw") is None else float(l["flow_limit_mw"]))
                  for l in doc["lines"])
    gens = []
    for i, g in enumerate(doc["generators"]):
        gens.append(Generator(int(g["id"]), int(g["bus"]), float(g["p_min_mw"]), float(g["p_max_mw"]),
                              _cost_from_json(g["cost"], f"$.generators[{i}].cost"),
                              _num(g.get("ramp_down_mw"), -math.inf),
                              _num(g.get("ramp_up_mw"), math.inf)))
    farms = tuple(WindFarm(int(w["id"]), int(w["bus"]), float(w.get("spillage_cost", 1.0)))
                  for w in doc.get("wind_farms", []))
    loads = []
    for ld in doc.get("loads", []):
        dem = tuple(float(v) for v in ld["demand_mw"])
        n = len(dem)
        loads.append(Load(int(ld["id"]), int(ld["bus"]), dem,
                          tuple(float(v) for v in ld.get("flex_lo", [1.0] * n)),
                          tuple(float(v) for v in ld.get("flex_hi", [1.0] * n)),
                          bool(ld.get("flexible", False))))
    meta = dict(doc.get("metadata", {}))
    net = Network(buses=buses, lines=lines, generators=tuple(gens), wind_farms=farms,
                  loads=tuple(loads), base_mva=float(doc["base_mva"]), horizon=T,
                  name=doc.get("name", ""), metadata=meta)
    metadata = {"name": net.name, "base_mva": net.base_mva, "comments": meta.get("comments", []),
                **{k: v for k, v in meta.items() if k != "comments"}}
    return CaseDocument("native-json", net, metadata, [])


def _finite_or_none(v: float):
    return None if not math.isfinite(v) else v


def network_to_dict(network: Network, metadata: Optional[dict] = None) -> dict:
    meta = dict(network.metadata)
    if metadata:
        meta.update({k: v for k, v in metadata.items() if k not in ("name", "base_mva")})
    out = {
        "schema": SCHEMA_VERSION,
        "name": network.name,
        "base_mva": network.base_mva,
        "horizon": network.horizon,
        "metadata": meta,
        "buses": [{"id": b.id, "slack": b.is_slack} for b in network.buses],
        "lines": [{"id": l.id, "from": l.from_bus, "to": l.to_bus,
                   "susceptance_pu": l.susceptance_pu, "tap_ratio": l.tap_ratio,
                   "flow_limit_mw": l.flow_limit_mw} for l in network.lines],
        "generators": [],
        "wind_farms": [{"id": w.id, "bus": w.bus, "spillage_cost": w.spillage_cost}
                       for w in network.wind_farms],
        "loads": [{"id": d.id, "bus": d.bus, "demand_mw": list(d.demand_mw),
                   "flex_lo": list(d.flex_lo), "flex_hi": list(d.flex_hi),
                   "flexible": d.is_flexible} for d in network.loads],
    }
    for g in network.generators:
        coeffs = [list(p) for p in g.cost.coefficients] if g.cost.kind == PIECEWISE \
            else list(g.cost.coefficients)
        out["generators"].append({
            "id": g.id, "bus": g.bus, "p_min_mw": g.p_min_mw, "p_max_mw": g.p_max_mw,
            "ramp_down_mw": _finite_or_none(g.ramp_down_mw),
            "ramp_up_mw": _finite_or_none(g.ramp_up_mw),
            "cost": {"kind": g.cost.kind, "coefficients": coeffs}})
    return out


def serialize_native(network: Network, metadata: Optional[dict] = None, indent: int = 1) -> str:
    return json.dumps(network_to_dict(network, metadata), indent=indent) + "\n"


# -- scenario CSV --------------------------------------------------------------

def _read_csv(csv_text: str) -> tuple[list[str], list[list[str]]]:
    if isinstance(csv_text, (bytes, bytearray)):
        try:
            csv_text = csv_text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CaseError("MALFORMED_CSV", f"not UTF-8: {exc}") from None
    try:
        rows = [r for r in csv.reader(io.StringIO(csv_text, newline="")) if any(c.strip() for c in r)]
    except csv.Error as exc:
        raise CaseError("MALFORMED_CSV", str(exc)) from None
    if not rows:
        raise CaseError("MALFORMED_CSV", "empty CSV")
    header = [h.strip() for h in rows[0]]
    return header, [[c.strip() for c in r] for r in rows[1:]]


def _period_columns(header: list[str], first: int) -> list[int]:
    cols = []
    for k, h in enumerate(header[first:], start=first):
        if re.fullmatch(r"t\d+", h):
            cols.append(k)
    expected = [f"t{i + 1}" for i in range(len(cols))]
    if [header[k] for k in cols] != expected:
        raise CaseError("MALFORMED_CSV", f"period columns must be t1..tT in order, got "
                        f"{[header[k] for k in cols]}", "header")
    return cols


def _float(cell: str, where: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise CaseError("MALFORMED_CSV", f"{cell!r} is not a number", where) from None
    if not math.isfinite(v):
        raise CaseError("MALFORMED_CSV", f"{cell!r} is not finite", where)
    return v


def _int(cell: str, where: str) -> int:
    try:
        return int(cell)
    except ValueError:
        raise CaseError("MALFORMED_CSV", f"{cell!r} is not an integer id", where) from None


def parse_scenarios(csv_text: str, expected: Optional[tuple[int, int]] = None,
                    farm_ids: Optional[Sequence[int]] = None) -> ScenarioSet:
    """Read ``farm_id, scenario_id, probability, t1..tT`` rows.

    ``expected`` is ``(num_farms, horizon)``. Farms are ordered by
    ``farm_ids`` when given, else by first appearance; scenarios by first
    appearance. Probabilities within 1e-9 of summing to one are renormalised.
    """
    header, rows = _read_csv(csv_text)
    if header[:3] != ["farm_id", "scenario_id", "probability"]:
        raise CaseError("MALFORMED_CSV", "header must start with farm_id,scenario_id,probability", "header")
    tcols = _period_columns(header, 3)
    if len(tcols) != len(header) - 3:
        raise CaseError("MALFORMED_CSV", "unexpected columns after the period columns", "header")
    T = len(tcols)
    if T == 0:
        raise CaseError("DIM_MISMATCH", "no period columns", "header")
    values: dict[tuple[int, int], list[float]] = {}
    probs: dict[int, float] = {}
    farm_order, scen_order = [], []
    for i, row in enumerate(rows, start=2):
        where = f"line {i}"
        if len(row) != len(header):
            raise CaseError("MALFORMED_CSV", f"{len(row)} fields, header has {len(header)}", where)
        f, s = _int(row[0], where), _int(row[1], where)
        p = _float(row[2], where)
        out = [_float(row[k], f"{where} {header[k]}") for k in tcols]
        if any(v < 0 for v in out):
            raise CaseError("NEGATIVE_OUTPUT", f"farm {f} scenario {s} has negative output", where)
        if (f, s) in values:
            raise CaseError("DIM_MISMATCH", f"duplicate row for farm {f} scenario {s}", where)
        if s in probs and abs(probs[s] - p) > 1e-12:
            raise CaseError("PROB_DISAGREEMENT", f"scenario {s} probability {p} vs {probs[s]}", where)
        probs.setdefault(s, p)
        values[(f, s)] = out
        if f not in farm_order:
            farm_order.append(f)
        if s not in scen_order:
            scen_order.append(s)
    if farm_ids is not None:
        if sorted(farm_ids) != sorted(farm_order) and not (len(farm_ids) == 0 and not farm_order):
            raise CaseError("DIM_MISMATCH", f"farms {sorted(farm_order)} in file, network has {sorted(farm_ids)}")
        farm_order = list(farm_ids)
    if expected is not None:
        nf, nt = expected
        if nf != len(farm_order) or nt != T:
            raise CaseError("DIM_MISMATCH", f"file has {len(farm_order)} farms x {T} periods, "
                            f"expected {nf} x {nt}")
    if len(values) != len(farm_order) * len(scen_order):
        raise CaseError("DIM_MISMATCH", "every farm needs a row for every scenario")
    p = np.array([probs[s] for s in scen_order], dtype=float)
    if np.any(p <= 0):
        raise CaseError("PROB_SUM", "scenario probabilities must be positive")
    total = math.fsum(p)
    if abs(total - 1.0) > 1e-9:
        raise CaseError("PROB_SUM", f"probabilities sum to {total:.12g}")
    # leave rounding-level deviations alone so serialise/parse is a fixed point
    if abs(total - 1.0) > len(p) * np.finfo(float).eps:
        p = p / total
    out = np.array([[values[(f, s)] for s in scen_order] for f in farm_order], dtype=float)
    out = out.reshape(len(farm_order), len(scen_order), T)
    return ScenarioSet(p, out, tuple(farm_order))


def serialize_scenarios(scenarios: ScenarioSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    T = scenarios.horizon
    w.writerow(["farm_id", "scenario_id", "probability"] + [f"t{t + 1}" for t in range(T)])
    ids = scenarios.farm_ids or tuple(range(1, scenarios.num_farms + 1))
    for k, f in enumerate(ids):
        for s in range(scenarios.num_scenarios):
            w.writerow([f, s + 1, repr(float(scenarios.probabilities[s]))]
                       + [repr(float(v)) for v in scenarios.output_mw[k, s]])
    return buf.getvalue()


# -- load profiles -----------------------------------------------------------------

def attach_profile(network: Network, csv_text: str) -> Network:
    """New network whose loads carry the CSV time series.

    Optional scalar ``flex_lo``/``flex_hi`` columns set a uniform flexibility
    interval; a load with an interval other than [1, 1] becomes flexible.
    Loads not in the CSV get their flat demand replicated to length T.
    """
    header, rows = _read_csv(csv_text)
    if not header or header[0] != "load_id":
        raise CaseError("MALFORMED_CSV", "header must start with load_id", "header")
    tcols = _period_columns(header, 1)
    extra = [h for k, h in enumerate(header) if k > 0 and k not in tcols]
    if any(h not in ("flex_lo", "flex_hi") for h in extra):
        raise CaseError("MALFORMED_CSV", f"unknown columns {extra}", "header")
    T = len(tcols)
    if T == 0:
        raise CaseError("HORIZON_MISMATCH", "no period columns", "header")
    i_lo = header.index("flex_lo") if "flex_lo" in header else None
    i_hi = header.index("flex_hi") if "flex_hi" in header else None
    by_id = {ld.id: ld for ld in network.loads}
    updates = {}
    for i, row in enumerate(rows, start=2):
        where = f"line {i}"
        if len(row) != len(header):
            raise CaseError("HORIZON_MISMATCH", f"{len(row)} fields, header has {len(header)}", where)
        lid = _int(row[0], where)
        if lid not in by_id:
            raise CaseError("UNKNOWN_LOAD_ID", f"load {lid} is not in the network", where)
        dem = tuple(_float(row[k], f"{where} {header[k]}") for k in tcols)
        lo = _float(row[i_lo], where) if i_lo is not None and row[i_lo] else 1.0
        hi = _float(row[i_hi], where) if i_hi is not None and row[i_hi] else 1.0
        flexible = not (lo == 1.0 and hi == 1.0)
        updates[lid] = replace(by_id[lid], demand_mw=dem, flex_lo=(lo,) * T, flex_hi=(hi,) * T,
                               is_flexible=flexible)
    loads = []
    for ld in network.loads:
        if ld.id in updates:
            loads.append(updates[ld.id])
        elif len(ld.demand_mw) == T:
            loads.append(ld)
        elif len(set(ld.demand_mw)) <= 1 and len(set(ld.flex_lo)) <= 1 and len(set(ld.flex_hi)) <= 1:
            loads.append(replace(ld, demand_mw=(ld.demand_mw[0],) * T,
                                 flex_lo=(ld.flex_lo[0],) * T, flex_hi=(ld.flex_hi[0],) * T))
        else:
            raise CaseError("HORIZON_MISMATCH", f"load {ld.id} has a {len(ld.demand_mw)}-period "
                            f"profile, CSV has {T}")
    return replace(network, loads=tuple(loads), horizon=T)


def serialize_profile(network: Network) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    T = network.horizon
    w.writerow(["load_id"] + [f"t{t + 1}" for t in range(T)] + ["flex_lo", "flex_hi"])
    for ld in network.loads:
        lo = ld.flex_lo[0] if len(set(ld.flex_lo)) == 1 else 1.0
        hi = ld.flex_hi[0] if len(set(ld.flex_hi)) == 1 else 1.0
        w.writerow([ld.id] + [repr(float(v)) for v in ld.demand_mw] + [repr(lo), repr(hi)])
    return buf.getvalue()


def load_case(path) -> CaseDocument:
    """Read a case file, choosing the parser from its extension / content."""
    from pathlib import Path

    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".m" or (p.suffix.lower() != ".json" and "mpc." in text):
        return parse_matpower(text)
    return parse_native(text)
