"""Scenario description, YAML ingestion and unit handling.

Everything inside a :class:`Scenario` is SI: W, kg/s, Pa, and kelvin
*relative to ambient* for temperatures. Files may declare other units in a
top-level ``units`` mapping; values are converted on load. ``save`` always
writes SI (temperatures as kelvin above ambient) so that load -> save -> load is exact.
"""

from __future__ import annotations

import copy
import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .circuits import GasPipe, HeatPipe
from .spectral import Horizon

DEVICE_KINDS = ("tpu", "ngu", "chp", "wt", "hp", "gb", "gw")

# quantity each device's bounds/ramps are stated in
DEVICE_QUANTITY = {"tpu": "power", "ngu": "power", "chp": "power", "wt": "power", "hp": "heat", "gb": "heat", "gw": "gas"}
# quantity of the device series that enters the frequency domain (history is given in this quantity)
HISTORY_QUANTITY = {"ngu": "power", "chp": "heat", "hp": "heat", "gb": "heat", "gw": "gas", "tpu": "power"}

UNIT_FACTORS = {
    "power": {"W": 1.0, "kW": 1e3, "MW": 1e6},
    "heat": {"W": 1.0, "kW": 1e3, "MW": 1e6},
    "gas": {"kg/s": 1.0, "kg/h": 1 / 3600.0, "t/h": 1000 / 3600.0},
    "pressure": {"Pa": 1.0, "kPa": 1e3, "bar": 1e5, "MPa": 1e6},
    "temperature": {"K": None, "degC": None, "K-rel": None},
}


class SchemaError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class Line:
    name: str
    frm: str
    to: str
    reactance: float
    limit: float = np.inf


@dataclass
class Epn:
    buses: list[str]
    lines: list[Line]
    slack: str | None = None


@dataclass
class GasNode:
    name: str
    p_lb: float = -np.inf
    p_ub: float = np.inf
    reference: bool = False
    p_ref: np.ndarray | None = None  # length n_t, only on reference nodes


@dataclass
class GasPipeSpec:
    name: str
    frm: str
    to: str
    pipe: GasPipe


@dataclass
class Ngn:
    nodes: list[GasNode] = field(default_factory=list)
    pipes: list[GasPipeSpec] = field(default_factory=list)


@dataclass
class HeatNode:
    name: str
    t_lb: float = -np.inf
    t_ub: float = np.inf


@dataclass
class HeatPipeSpec:
    name: str
    frm: str
    to: str
    pipe: HeatPipe


@dataclass
class Dhn:
    nodes: list[HeatNode] = field(default_factory=list)
    pipes: list[HeatPipeSpec] = field(default_factory=list)
    ambient: float = 283.15  # K, only used at the I/O boundary


@dataclass
class Device:
    kind: str
    name: str
    bus: str | None = None
    gas_node: str | None = None
    heat_node: str | None = None
    lb: float = 0.0
    ub: float = np.inf
    ramp_up: float = np.inf
    ramp_down: float = np.inf
    ratio: float | None = None
    cost: tuple = (0.0, 0.0, 0.0)  # (u2, u1, u0) on the main quantity, per dispatch step
    cost_heat: tuple = (0.0, 0.0, 0.0)  # CHP heat cost


@dataclass
class Series:
    power_load: dict = field(default_factory=dict)  # bus -> (n_disp,)
    gas_load: dict = field(default_factory=dict)  # node -> (n_t,)
    heat_load: dict = field(default_factory=dict)  # node -> (n_t,)
    wind: dict = field(default_factory=dict)  # device -> (n_disp,)
    history: dict = field(default_factory=dict)  # device -> (n_hist,)


@dataclass
class SolverOptions:
    epsilon: float | None = None
    n_r: int = 1
    max_iter: int = 50
    dx_gas: float = 200.0
    dx_heat: float = 100.0
    tol: float = 1e-8


@dataclass
class Scenario:
    name: str
    horizon: Horizon
    epn: Epn
    ngn: Ngn
    dhn: Dhn
    devices: list[Device]
    series: Series
    solver: SolverOptions = field(default_factory=SolverOptions)

    # ------------------------------------------------------------ indexing
    def bus_index(self) -> dict:
        return {b: i for i, b in enumerate(self.epn.buses)}

    def gas_index(self) -> dict:
        return {n.name: i for i, n in enumerate(self.ngn.nodes)}

    def heat_index(self) -> dict:
        return {n.name: i for i, n in enumerate(self.dhn.nodes)}

    def of_kind(self, kind: str) -> list[Device]:
        return [d for d in self.devices if d.kind == kind]

    def reference_nodes(self) -> list[int]:
        return [i for i, n in enumerate(self.ngn.nodes) if n.reference]

    def slack_bus(self) -> int:
        idx = self.bus_index()
        return idx[self.epn.slack] if self.epn.slack is not None else 0

    def copy(self) -> "Scenario":
        return copy.deepcopy(self)


# --------------------------------------------------------------------- units


def _factor(units: dict, quantity: str) -> float:
    unit = units.get(quantity)
    if unit is None:
        return 1.0
    table = UNIT_FACTORS[quantity]
    if unit not in table:
        raise SchemaError(f"units.{quantity}", f"unknown unit {unit!r}; expected one of {sorted(table)}")
    return table[unit]


def _temperature(units: dict, ambient_k: float):
    """Return a map file-value -> relative kelvin."""
    unit = units.get("temperature", "K")
    if unit not in ("K", "degC", "K-rel"):
        raise SchemaError("units.temperature", f"unknown unit {unit!r}")
    if unit == "K-rel":
        return lambda v: v
    offset = 273.15 if unit == "degC" else 0.0
    return lambda v: v + offset - ambient_k


# ------------------------------------------------------------------- parsing


def _num(value, path):
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return np.inf
    if isinstance(value, str) and value.strip().lower() in ("-inf", "-infinity"):
        return -np.inf
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise SchemaError(path, f"expected a number, got {value!r}") from None
    if np.isnan(out):
        raise SchemaError(path, "NaN is not allowed")
    return out


def _req(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise SchemaError(path, "expected a mapping")
    if key not in d:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return d[key]


def _series(value, path: str, base: Path | None, length: int | None = None) -> np.ndarray:
    if isinstance(value, dict) and "csv" in value:
        if base is None:
            raise SchemaError(path, "CSV series need a file location")
        fn = base / value["csv"]
        col = value.get("column")
        try:
            with open(fn, newline="", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
        except OSError as exc:
            raise SchemaError(path, f"cannot read {fn}: {exc}") from None
        if not rows:
            raise SchemaError(path, f"{fn} is empty")
        if col is None:
            cols = [c for c in rows[0] if c not in ("time", "step", "timestamp")]
            if len(cols) != 1:
                raise SchemaError(path, f"{fn} has several columns; name one with 'column'")
            col = cols[0]
        if col not in rows[0]:
            raise SchemaError(path, f"column {col!r} not in {fn}")
        arr = np.array([_num(r[col], f"{path}[{i}]") for i, r in enumerate(rows)])
    elif isinstance(value, (list, tuple)):
        arr = np.array([_num(v, f"{path}[{i}]") for i, v in enumerate(value)])
    elif length is not None and isinstance(value, (int, float)):
        arr = np.full(length, float(value))
    else:
        raise SchemaError(path, "expected a list of numbers or a {csv: ...} reference")
    if length is not None and arr.size != length:
        raise SchemaError(path, f"expected {length} values, got {arr.size}")
    return arr


def _check_name(name, path, seen: set):
    if not isinstance(name, (str, int)):
        raise SchemaError(path, "names must be strings")
    name = str(name)
    if name in seen:
        raise SchemaError(path, f"duplicate name {name!r}")
    seen.add(name)
    return name


def scenario_from_dict(doc: dict, base: Path | None = None) -> Scenario:
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "expected a mapping")
    units = doc.get("units") or {}
    hz = _req(doc, "horizon", "<root>")
    horizon = Horizon(
        int(_num(_req(hz, "n_hist", "horizon"), "horizon.n_hist")),
        int(_num(_req(hz, "n_disp", "horizon"), "horizon.n_disp")),
        _num(_req(hz, "dt", "horizon"), "horizon.dt"),
    )
    n_t, n_d, n_h = horizon.n_t, horizon.n_disp, horizon.n_hist
    fp, fh, fg, fpr = _factor(units, "power"), _factor(units, "heat"), _factor(units, "gas"), _factor(units, "pressure")

    # EPN
    e = _req(doc, "epn", "<root>")
    seen: set = set()
    buses = [_check_name(b, f"epn.buses[{i}]", seen) for i, b in enumerate(_req(e, "buses", "epn"))]
    if not buses:
        raise SchemaError("epn.buses", "at least one bus is required")
    lines, seen = [], set()
    for i, ln in enumerate(e.get("lines") or []):
        p = f"epn.lines[{i}]"
        frm, to = str(_req(ln, "from", p)), str(_req(ln, "to", p))
        for k, v in (("from", frm), ("to", to)):
            if v not in buses:
                raise SchemaError(f"{p}.{k}", f"unknown bus {v!r}")
        x = _num(_req(ln, "reactance", p), f"{p}.reactance")
        if x <= 0:
            raise SchemaError(f"{p}.reactance", "must be positive")
        lines.append(Line(_check_name(ln.get("name", f"L{i}"), f"{p}.name", seen), frm, to, x, _num(ln.get("limit", np.inf), f"{p}.limit") * fp))
    slack = e.get("slack")
    if slack is not None and str(slack) not in buses:
        raise SchemaError("epn.slack", f"unknown bus {slack!r}")
    epn = Epn(buses, lines, None if slack is None else str(slack))

    # NGN
    g = doc.get("ngn") or {}
    gnodes, seen = [], set()
    for i, nd in enumerate(g.get("nodes") or []):
        p = f"ngn.nodes[{i}]"
        name = _check_name(_req(nd, "name", p), f"{p}.name", seen)
        ref = bool(nd.get("reference", False))
        p_ref = None
        if "p_ref" in nd:
            p_ref = _series(nd["p_ref"], f"{p}.p_ref", base, n_t) * fpr
        gnodes.append(GasNode(name, _num(nd.get("p_lb", -np.inf), f"{p}.p_lb") * fpr, _num(nd.get("p_ub", np.inf), f"{p}.p_ub") * fpr, ref, p_ref))
    gnames = [n.name for n in gnodes]
    gpipes, seen = [], set()
    for i, pp in enumerate(g.get("pipes") or []):
        p = f"ngn.pipes[{i}]"
        frm, to = str(_req(pp, "from", p)), str(_req(pp, "to", p))
        for k, v in (("from", frm), ("to", to)):
            if v not in gnames:
                raise SchemaError(f"{p}.{k}", f"unknown gas node {v!r}")
        try:
            geom = GasPipe(
                length=_num(_req(pp, "length", p), f"{p}.length"),
                diameter=_num(_req(pp, "diameter", p), f"{p}.diameter"),
                friction=_num(pp.get("friction", 0.01), f"{p}.friction"),
                sonic_speed=_num(pp.get("sonic_speed", 340.0), f"{p}.sonic_speed"),
                velocity=_num(pp.get("velocity", 0.0), f"{p}.velocity"),
                incline=_num(pp.get("incline", 0.0), f"{p}.incline"),
                area=None if pp.get("area") is None else _num(pp["area"], f"{p}.area"),
            )
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(p, str(exc)) from None
        gpipes.append(GasPipeSpec(_check_name(pp.get("name", f"GP{i}"), f"{p}.name", seen), frm, to, geom))
    ngn = Ngn(gnodes, gpipes)

    # DHN
    h = doc.get("dhn") or {}
    ambient_unit = units.get("temperature", "K")
    amb = _num(h.get("ambient", 10.0 if ambient_unit == "degC" else 283.15), "dhn.ambient")
    ambient_k = amb + 273.15 if ambient_unit == "degC" else amb
    to_rel = _temperature(units, ambient_k)
    hnodes, seen = [], set()
    for i, nd in enumerate(h.get("nodes") or []):
        p = f"dhn.nodes[{i}]"
        name = _check_name(_req(nd, "name", p), f"{p}.name", seen)
        lb = nd.get("t_lb")
        ub = nd.get("t_ub")
        hnodes.append(HeatNode(name, -np.inf if lb is None else to_rel(_num(lb, f"{p}.t_lb")), np.inf if ub is None else to_rel(_num(ub, f"{p}.t_ub"))))
    hnames = [n.name for n in hnodes]
    cp = _num(h.get("specific_heat", 4182.0), "dhn.specific_heat")
    rho = _num(h.get("density", 1000.0), "dhn.density")
    hpipes, seen = [], set()
    for i, pp in enumerate(h.get("pipes") or []):
        p = f"dhn.pipes[{i}]"
        frm, to = str(_req(pp, "from", p)), str(_req(pp, "to", p))
        for k, v in (("from", frm), ("to", to)):
            if v not in hnames:
                raise SchemaError(f"{p}.{k}", f"unknown heat node {v!r}")
        if "area" in pp:
            area = _num(pp["area"], f"{p}.area")
        else:
            area = np.pi * _num(_req(pp, "diameter", p), f"{p}.diameter") ** 2 / 4
        try:
            geom = HeatPipe(
                length=_num(_req(pp, "length", p), f"{p}.length"),
                area=area,
                mass_flow=_num(_req(pp, "mass_flow", p), f"{p}.mass_flow"),
                loss=_num(pp.get("loss", 0.0), f"{p}.loss"),
                specific_heat=cp,
                density=rho,
            )
        except ValueError as exc:
            raise SchemaError(p, str(exc)) from None
        hpipes.append(HeatPipeSpec(_check_name(pp.get("name", f"HP{i}"), f"{p}.name", seen), frm, to, geom))
    dhn = Dhn(hnodes, hpipes, ambient_k)

    # devices
    qf = {"power": fp, "heat": fh, "gas": fg}
    devices, seen = [], set()
    for i, dv in enumerate(doc.get("devices") or []):
        p = f"devices[{i}]"
        kind = _req(dv, "kind", p)
        if kind not in DEVICE_KINDS:
            raise SchemaError(f"{p}.kind", f"unknown device kind {kind!r}")
        name = _check_name(_req(dv, "name", p), f"{p}.name", seen)
        f = qf[DEVICE_QUANTITY[kind]]
        d = Device(kind, name)
        for attr, pool, label in (("bus", buses, "bus"), ("gas_node", gnames, "gas node"), ("heat_node", hnames, "heat node")):
            if attr in dv:
                v = str(dv[attr])
                if v not in pool:
                    raise SchemaError(f"{p}.{attr}", f"unknown {label} {v!r}")
                setattr(d, attr, v)
        d.lb = _num(dv.get("lb", 0.0), f"{p}.lb") * f
        d.ub = _num(dv.get("ub", np.inf), f"{p}.ub") * f
        d.ramp_up = _num(dv.get("ramp_up", np.inf), f"{p}.ramp_up") * f
        d.ramp_down = _num(dv.get("ramp_down", np.inf), f"{p}.ramp_down") * f
        if "ratio" in dv:
            r = _num(dv["ratio"], f"{p}.ratio")
            # P = r m (ngu), P = r h (chp), h = r m (gb), h = r P (hp)
            r *= {"ngu": fp / fg, "chp": fp / fh, "gb": fh / fg, "hp": fh / fp}.get(kind, 1.0)
            d.ratio = r
        if "cost" in dv:
            u = [_num(v, f"{p}.cost[{j}]") for j, v in enumerate(dv["cost"])]
            if len(u) != 3:
                raise SchemaError(f"{p}.cost", "expected [u2, u1, u0]")
            d.cost = (u[0] / f**2, u[1] / f, u[2])
        if "cost_heat" in dv:
            u = [_num(v, f"{p}.cost_heat[{j}]") for j, v in enumerate(dv["cost_heat"])]
            if len(u) != 3:
                raise SchemaError(f"{p}.cost_heat", "expected [u2, u1, u0]")
            d.cost_heat = (u[0] / fh**2, u[1] / fh, u[2])
        devices.append(d)

    ts = doc.get("timeseries") or {}
    series = Series()
    for bus, v in (ts.get("power_load") or {}).items():
        if str(bus) not in buses:
            raise SchemaError(f"timeseries.power_load.{bus}", "unknown bus")
        series.power_load[str(bus)] = _series(v, f"timeseries.power_load.{bus}", base, n_d) * fp
    for node, v in (ts.get("gas_load") or {}).items():
        if str(node) not in gnames:
            raise SchemaError(f"timeseries.gas_load.{node}", "unknown gas node")
        series.gas_load[str(node)] = _series(v, f"timeseries.gas_load.{node} (gas node {node}, historical + dispatch)", base, n_t) * fg
    for node, v in (ts.get("heat_load") or {}).items():
        if str(node) not in hnames:
            raise SchemaError(f"timeseries.heat_load.{node}", "unknown heat node")
        series.heat_load[str(node)] = _series(v, f"timeseries.heat_load.{node} (heat node {node}, historical + dispatch)", base, n_t) * fh
    names = {d.name: d for d in devices}
    for dev, v in (ts.get("wind") or {}).items():
        if str(dev) not in names or names[str(dev)].kind != "wt":
            raise SchemaError(f"timeseries.wind.{dev}", "unknown wind turbine")
        series.wind[str(dev)] = _series(v, f"timeseries.wind.{dev}", base, n_d) * fp
    for dev, v in (ts.get("history") or {}).items():
        if str(dev) not in names:
            raise SchemaError(f"timeseries.history.{dev}", "unknown device")
        kind = names[str(dev)].kind
        if kind not in HISTORY_QUANTITY:
            raise SchemaError(f"timeseries.history.{dev}", f"{kind} devices carry no history")
        series.history[str(dev)] = _series(v, f"timeseries.history.{dev}", base, n_h) * qf[HISTORY_QUANTITY[kind]]

    so = doc.get("solver") or {}
    solver = SolverOptions(
        epsilon=None if so.get("epsilon") is None else _num(so["epsilon"], "solver.epsilon"),
        n_r=int(_num(so.get("n_r", 1), "solver.n_r")),
        max_iter=int(_num(so.get("max_iter", 50), "solver.max_iter")),
        dx_gas=_num(so.get("dx_gas", 200.0), "solver.dx_gas"),
        dx_heat=_num(so.get("dx_heat", 100.0), "solver.dx_heat"),
        tol=_num(so.get("tol", 1e-8), "solver.tol"),
    )
    sc = Scenario(str(doc.get("name", "scenario")), horizon, epn, ngn, dhn, devices, series, solver)
    validate(sc)
    return sc


# ---------------------------------------------------------------- validation


def default_reference(sc: Scenario) -> int:
    """Gas node with the largest connected gas-well capacity (ties: lowest index)."""
    cap = np.zeros(len(sc.ngn.nodes))
    idx = sc.gas_index()
    for d in sc.of_kind("gw"):
        cap[idx[d.gas_node]] += d.ub if np.isfinite(d.ub) else 0.0
    return int(np.argmax(cap))


def validate(sc: Scenario) -> None:
    """Cross-field checks; fills defaults (reference node, reference pressure)."""
    h = sc.horizon
    for i, d in enumerate(sc.devices):
        p = f"devices[{i}] ({d.name})"
        need = {
            "tpu": ("bus",),
            "ngu": ("bus", "gas_node"),
            "chp": ("bus", "heat_node"),
            "wt": ("bus",),
            "hp": ("bus", "heat_node"),
            "gb": ("gas_node", "heat_node"),
            "gw": ("gas_node",),
        }[d.kind]
        for attr in need:
            if getattr(d, attr) is None:
                raise SchemaError(f"{p}.{attr}", f"{d.kind} devices must be attached to a {attr.replace('_', ' ')}")
        if d.lb > d.ub:
            raise SchemaError(p, "lb > ub")
        if d.ramp_up < 0 or d.ramp_down < 0:
            raise SchemaError(p, "ramp limits must be >= 0")
        if d.kind in ("ngu", "chp", "gb", "hp"):
            if d.ratio is None or not d.ratio > 0:
                raise SchemaError(f"{p}.ratio", "coupling ratio must be positive")
        if d.cost[0] < 0 or d.cost_heat[0] < 0:
            raise SchemaError(f"{p}.cost", "quadratic cost coefficients must be >= 0")
        if d.kind == "wt" and d.name not in sc.series.wind:
            raise SchemaError(f"timeseries.wind.{d.name}", f"missing availability series ({h.n_disp} values)")
        if d.kind in ("ngu", "chp", "hp", "gb", "gw") and h.n_hist > 0 and d.name not in sc.series.history:
            raise SchemaError(f"timeseries.history.{d.name}", f"missing historical output ({h.n_hist} values)")
    for name, arr in list(sc.series.gas_load.items()) + list(sc.series.heat_load.items()):
        if np.any(arr < 0):
            raise SchemaError(f"timeseries load {name}", "loads must be >= 0")
    for name, arr in sc.series.power_load.items():
        if np.any(arr < 0):
            raise SchemaError(f"timeseries.power_load.{name}", "loads must be >= 0")
    if sc.ngn.nodes:
        if not sc.reference_nodes():
            sc.ngn.nodes[default_reference(sc)].reference = True
        for node in sc.ngn.nodes:
            if node.reference and node.p_ref is None:
                if not (np.isfinite(node.p_lb) and np.isfinite(node.p_ub)):
                    raise SchemaError(f"ngn.nodes.{node.name}.p_ref", "reference node needs p_ref or finite pressure bounds")
                node.p_ref = np.full(h.n_t, 0.5 * (node.p_lb + node.p_ub))
    gi = sc.gas_index()
    for gname in sc.series.gas_load:
        if gname not in gi:
            raise SchemaError(f"timeseries.gas_load.{gname}", "unknown gas node")
    # gas loads must cover history + dispatch
    for node, arr in sc.series.gas_load.items():
        if arr.size != h.n_t:
            raise SchemaError(f"timeseries.gas_load.{node}", f"gas node {node}: expected {h.n_t} values (n_hist + n_disp)")


# ------------------------------------------------------------------- dump


def _f(x):
    x = float(x)
    if np.isposinf(x):
        return "inf"
    if np.isneginf(x):
        return "-inf"
    return x


def _list(a):
    return [_f(v) for v in np.asarray(a, float).ravel()]


def scenario_to_dict(sc: Scenario) -> dict:
    h = sc.horizon
    doc = {
        "name": sc.name,
        "units": {"temperature": "K-rel"},
        "horizon": {"n_hist": h.n_hist, "n_disp": h.n_disp, "dt": float(h.dt)},
        "epn": {
            "buses": list(sc.epn.buses),
            "lines": [{"name": l.name, "from": l.frm, "to": l.to, "reactance": _f(l.reactance), "limit": _f(l.limit)} for l in sc.epn.lines],
        },
        "ngn": {
            "nodes": [],
            "pipes": [
                {
                    "name": p.name,
                    "from": p.frm,
                    "to": p.to,
                    "length": _f(p.pipe.length),
                    "diameter": _f(p.pipe.diameter),
                    "area": _f(p.pipe.area),
                    "friction": _f(p.pipe.friction),
                    "sonic_speed": _f(p.pipe.sonic_speed),
                    "velocity": _f(p.pipe.velocity),
                    "incline": _f(p.pipe.incline),
                }
                for p in sc.ngn.pipes
            ],
        },
        "dhn": {
            "ambient": _f(sc.dhn.ambient),
            "nodes": [],
            "pipes": [
                {"name": p.name, "from": p.frm, "to": p.to, "length": _f(p.pipe.length), "area": _f(p.pipe.area), "mass_flow": _f(p.pipe.mass_flow), "loss": _f(p.pipe.loss)}
                for p in sc.dhn.pipes
            ],
        },
        "devices": [],
        "timeseries": {
            "power_load": {k: _list(v) for k, v in sc.series.power_load.items()},
            "gas_load": {k: _list(v) for k, v in sc.series.gas_load.items()},
            "heat_load": {k: _list(v) for k, v in sc.series.heat_load.items()},
            "wind": {k: _list(v) for k, v in sc.series.wind.items()},
            "history": {k: _list(v) for k, v in sc.series.history.items()},
        },
        "solver": {
            "epsilon": None if sc.solver.epsilon is None else _f(sc.solver.epsilon),
            "n_r": int(sc.solver.n_r),
            "max_iter": int(sc.solver.max_iter),
            "dx_gas": _f(sc.solver.dx_gas),
            "dx_heat": _f(sc.solver.dx_heat),
            "tol": _f(sc.solver.tol),
        },
    }
    if sc.epn.slack is not None:
        doc["epn"]["slack"] = sc.epn.slack
    if sc.dhn.pipes:
        doc["dhn"]["specific_heat"] = _f(sc.dhn.pipes[0].pipe.specific_heat)
        doc["dhn"]["density"] = _f(sc.dhn.pipes[0].pipe.density)
    for n in sc.ngn.nodes:
        nd = {"name": n.name, "p_lb": _f(n.p_lb), "p_ub": _f(n.p_ub)}
        if n.reference:
            nd["reference"] = True
            nd["p_ref"] = _list(n.p_ref)
        doc["ngn"]["nodes"].append(nd)
    for n in sc.dhn.nodes:
        # kelvin above ambient, matching the declared K-rel unit
        nd = {"name": n.name}
        if np.isfinite(n.t_lb):
            nd["t_lb"] = _f(n.t_lb)
        if np.isfinite(n.t_ub):
            nd["t_ub"] = _f(n.t_ub)
        doc["dhn"]["nodes"].append(nd)
    for d in sc.devices:
        dv = {"kind": d.kind, "name": d.name}
        for attr in ("bus", "gas_node", "heat_node"):
            if getattr(d, attr) is not None:
                dv[attr] = getattr(d, attr)
        dv.update({"lb": _f(d.lb), "ub": _f(d.ub), "ramp_up": _f(d.ramp_up), "ramp_down": _f(d.ramp_down)})
        if d.ratio is not None:
            dv["ratio"] = _f(d.ratio)
        dv["cost"] = [float(c) for c in d.cost]
        if d.kind == "chp":
            dv["cost_heat"] = [float(c) for c in d.cost_heat]
        doc["devices"].append(dv)
    return doc


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise SchemaError(str(path), f"not valid YAML: {exc}") from None
    return scenario_from_dict(doc, path.parent)


def loads_scenario(text: str) -> Scenario:
    return scenario_from_dict(yaml.safe_load(io.StringIO(text)))


def dumps_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None, width=100)


def save_scenario(sc: Scenario, path) -> None:
    _atomic_write(Path(path), dumps_scenario(sc))
