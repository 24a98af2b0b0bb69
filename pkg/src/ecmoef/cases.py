"""Bundled scenarios: a hand-checkable micro system, a desk-scale system and cascades.

The desk-scale system couples a 9-bus grid, a 7-node gas tree and a 12-node
district heating tree. Parameters are synthetic but sized like a small town
network: 140 km of transmission gas pipe at ~5 MPa and a 100 kg/s heating
loop. Historical outputs come from a merit-order rule over the previous day
so that no optimisation is needed to build a scenario.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .circuits import GasPipe, HeatPipe
from .scenario import (
    Device,
    Dhn,
    Epn,
    GasNode,
    GasPipeSpec,
    HeatNode,
    HeatPipeSpec,
    Line,
    Ngn,
    Scenario,
    Series,
    SolverOptions,
    load_scenario,
    save_scenario,
    validate,
)
from .spectral import Horizon

DATA = Path(__file__).with_name("data")
MW = 1e6
BAR = 1e5

# gas: rho = p / c^2 at the nominal pressure
_P_NOM = 50 * BAR
_C_GAS = 340.0


def _daily(n: int, dt: float, base: float, swing: float, phase_h: float = 0.0, second: float = 0.0) -> np.ndarray:
    """Smooth daily profile with an optional second harmonic."""
    hours = np.arange(n) * dt / 3600.0
    w = 2 * np.pi * (hours - phase_h) / 24.0
    return base + swing * np.cos(w) + second * np.cos(2 * w)


def _gas_pipe(length: float, diameter: float, flow: float, friction: float = 0.012) -> GasPipe:
    area = np.pi * diameter**2 / 4
    rho = _P_NOM / _C_GAS**2
    return GasPipe(length=length, diameter=diameter, friction=friction, sonic_speed=_C_GAS, velocity=flow / (rho * area))


def _heat_pipe(length: float, diameter: float, flow: float, loss: float = 0.8) -> HeatPipe:
    return HeatPipe(length=length, area=np.pi * diameter**2 / 4, mass_flow=flow, loss=loss)


# ------------------------------------------------------------------- micro


def micro() -> Scenario:
    """2 buses, 2 gas nodes, 2 heat nodes, 4 historical + 4 dispatch hours."""
    hz = Horizon(4, 4, 3600.0)
    n_t, n_d = hz.n_t, hz.n_disp
    epn = Epn(["B1", "B2"], [Line("L1", "B1", "B2", 0.1, 60 * MW)], slack="B1")
    ngn = Ngn(
        [GasNode("G1", 45 * BAR, 55 * BAR, True, np.full(n_t, 50 * BAR)), GasNode("G2", 46 * BAR, 55 * BAR)],
        [GasPipeSpec("GP1", "G1", "G2", _gas_pipe(20e3, 0.3, 1.5))],
    )
    dhn = Dhn(
        [HeatNode("H1", 40.0, 90.0), HeatNode("H2", 30.0, 90.0)],
        [HeatPipeSpec("HP1", "H1", "H2", _heat_pipe(2e3, 0.25, 50.0))],
    )
    devices = [
        Device("tpu", "TPU1", bus="B1", lb=0, ub=80 * MW, ramp_up=30 * MW, ramp_down=30 * MW, cost=(0.02 / MW**2, 25 / MW, 10.0)),
        Device("ngu", "NGU1", bus="B2", gas_node="G2", lb=0, ub=60 * MW, ramp_up=40 * MW, ramp_down=40 * MW, ratio=20 * MW, cost=(0.0, 1 / MW, 0.0)),
        Device("chp", "CHP1", bus="B1", heat_node="H1", lb=0, ub=20 * MW, ratio=1.2, cost=(0.02 / MW**2, 30 / MW, 0.0), cost_heat=(0.01 / MW**2, 2 / MW, 0.0)),
        Device("wt", "WT1", bus="B2", lb=0, ub=30 * MW),
        Device("hp", "HP1", bus="B2", heat_node="H1", lb=0, ub=8 * MW, ratio=3.0),
        Device("gw", "GW1", gas_node="G1", lb=0, ub=10.0, cost=(1.0, 900.0, 0.0)),
    ]
    load = _daily(n_d, hz.dt, 70 * MW, 15 * MW, 18.0)
    gas_load = _daily(n_t, hz.dt, 1.0, 0.3, 8.0)
    heat_load = _daily(n_t, hz.dt, 12 * MW, 3 * MW, 7.0)
    series = Series(
        power_load={"B2": load},
        gas_load={"G2": gas_load},
        heat_load={"H2": heat_load},
        wind={"WT1": _daily(n_d, hz.dt, 15 * MW, 8 * MW, 3.0)},
        history={
            "NGU1": np.full(hz.n_hist, 20 * MW),
            "CHP1": np.full(hz.n_hist, 10 * MW),
            "HP1": np.full(hz.n_hist, 4 * MW),
            "GW1": np.full(hz.n_hist, 2.0),
            "TPU1": np.full(hz.n_hist, 40 * MW),
        },
    )
    sc = Scenario("micro", hz, epn, ngn, dhn, devices, series)
    validate(sc)
    return sc


# ------------------------------------------------------------------- small

_EPN_LINES = [  # from, to, reactance (p.u.), limit (MW)
    ("1", "4", 0.0576, 130),
    ("4", "5", 0.092, 250),
    ("5", "6", 0.17, 150),
    ("3", "6", 0.0586, 250),
    ("6", "7", 0.1008, 150),
    ("7", "8", 0.072, 250),
    ("8", "2", 0.0625, 250),
    ("8", "9", 0.161, 150),
    ("9", "4", 0.085, 250),
]
_GAS_PIPES = [  # from, to, length (km), diameter (m), nominal flow (kg/s)
    ("1", "2", 30, 0.3, 5.5),
    ("2", "3", 25, 0.25, 3.8),
    ("2", "4", 20, 0.25, 1.7),
    ("4", "5", 25, 0.3, 4.7),
    ("3", "6", 20, 0.2, 1.6),
    ("5", "7", 20, 0.3, 4.3),
]
_GAS_BOUNDS = {"1": (48, 52), "2": (44, 52), "3": (43, 52), "4": (44, 52), "5": (43, 52), "6": (47, 52), "7": (47, 52)}
_HEAT_PIPES = [  # from, to, length (km), diameter (m), water flow (kg/s)
    ("1", "2", 1.5, 0.3, 100),
    ("2", "3", 1.2, 0.25, 60),
    ("2", "5", 1.0, 0.2, 40),
    ("3", "4", 1.4, 0.2, 35),
    ("3", "7", 1.1, 0.2, 25),
    ("4", "9", 0.9, 0.2, 35),
    ("5", "6", 1.3, 0.2, 25),
    ("5", "10", 0.8, 0.15, 15),
    ("6", "11", 1.0, 0.2, 25),
    ("7", "8", 1.2, 0.2, 25),
    ("8", "12", 0.7, 0.2, 25),
]
_HEAT_TLB = {1: 50.0}
_HEAT_TUB = {10: 77.0, 11: 77.0, 12: 77.0}
_HEAT_LOADS = {"9": 0.30, "10": 0.15, "11": 0.25, "12": 0.30}


def _small_parts(tag: str = ""):
    t = tag
    buses = [f"{t}{i}" for i in range(1, 10)]
    lines = [Line(f"{t}L{a}-{b}", f"{t}{a}", f"{t}{b}", x, lim * MW) for a, b, x, lim in _EPN_LINES]
    gnodes = [GasNode(f"{t}G{i}", lo * BAR, hi * BAR) for i, (lo, hi) in _GAS_BOUNDS.items()]
    gpipes = [GasPipeSpec(f"{t}GP{a}-{b}", f"{t}G{a}", f"{t}G{b}", _gas_pipe(l * 1e3, d, q)) for a, b, l, d, q in _GAS_PIPES]
    hnodes = [HeatNode(f"{t}H{i}", _HEAT_TLB.get(i, 40.0), _HEAT_TUB.get(i, 90.0)) for i in range(1, 13)]
    hpipes = [HeatPipeSpec(f"{t}HP{a}-{b}", f"{t}H{a}", f"{t}H{b}", _heat_pipe(l * 1e3, d, q)) for a, b, l, d, q in _HEAT_PIPES]
    devices = [
        Device("tpu", f"{t}TPU1", bus=f"{t}1", lb=20 * MW, ub=200 * MW, ramp_up=30 * MW, ramp_down=30 * MW, cost=(0.01 / MW**2, 10.0 / MW, 40.0)),
        Device("ngu", f"{t}NGU1", bus=f"{t}2", gas_node=f"{t}G7", lb=0, ub=150 * MW, ramp_up=40 * MW, ramp_down=40 * MW, ratio=20 * MW, cost=(0.0, 0.5 / MW, 10.0)),
        Device("chp", f"{t}CHP1", bus=f"{t}3", heat_node=f"{t}H1", lb=5 * MW, ub=40 * MW, ramp_up=10 * MW, ramp_down=10 * MW, ratio=1.2,
               cost=(0.02 / MW**2, 8.0 / MW, 30.0), cost_heat=(0.01 / MW**2, 1.0 / MW, 0.0)),
        Device("wt", f"{t}WT1", bus=f"{t}9", lb=0, ub=80 * MW),
        Device("hp", f"{t}HP1", bus=f"{t}7", heat_node=f"{t}H1", lb=0, ub=15 * MW, ramp_up=5 * MW, ramp_down=5 * MW, ratio=3.0),
        Device("gb", f"{t}GB1", gas_node=f"{t}G5", heat_node=f"{t}H1", lb=0, ub=20 * MW, ramp_up=5 * MW, ramp_down=5 * MW, ratio=45 * MW),
        Device("gw", f"{t}GW1", gas_node=f"{t}G1", lb=0, ub=30.0, ramp_up=4.0, ramp_down=4.0, cost=(0.5, 250.0, 0.0)),
        Device("gw", f"{t}GW2", gas_node=f"{t}G4", lb=0, ub=6.0, ramp_up=1.0, ramp_down=1.0, cost=(1.0, 265.0, 0.0)),
    ]
    return buses, lines, gnodes, gpipes, hnodes, hpipes, devices


def _small_series(hz: Horizon, tag: str = "", scale: float = 1.0) -> Series:
    """Loads, wind and a merit-order history for one copy of the desk system."""
    t = tag
    n_t, n_h, n_d, dt = hz.n_t, hz.n_hist, hz.n_disp, hz.dt
    # two consecutive days; the dispatch day runs a little heavier
    day = np.where(np.arange(n_t) < n_h, 1.0, 1.04) * scale
    pload = _daily(n_t, dt, 205 * MW, 45 * MW, 19.0, 12 * MW) * day
    split = {"5": 0.40, "7": 0.35, "9": 0.25}
    wind = np.clip(_daily(n_t, dt, 45 * MW, 25 * MW, 3.0, 5 * MW), 0, None)
    gas = {"3": _daily(n_t, dt, 2.2, 0.6, 8.0) * day, "6": _daily(n_t, dt, 1.6, 0.5, 9.0) * day, "7": _daily(n_t, dt, 1.2, 0.3, 18.0) * day}
    hbase = _daily(n_t, dt, 26 * MW, 5 * MW, 7.0, 2 * MW) * day
    heat = {k: hbase * v for k, v in _HEAT_LOADS.items()}

    # merit order for the historical day
    hp = np.full(n_h, 10 * MW)
    chp_h = np.clip(hbase[:n_h] * 1.02 - hp - 4 * MW, 5 * MW / 1.2, 40 * MW / 1.2)
    gb = np.clip(hbase[:n_h] * 1.02 - hp - chp_h, 0, 20 * MW)
    net = pload[:n_h] - wind[:n_h] + hp / 3.0 - 1.2 * chp_h
    tpu = np.clip(net, 20 * MW, 125 * MW)
    ngu = np.clip(net - tpu, 0, 150 * MW)
    gas_use = ngu / (20 * MW) + gb / (45 * MW) + sum(g[:n_h] for g in gas.values())
    gw2 = np.full(n_h, 3.0)
    gw1 = gas_use - gw2
    return Series(
        power_load={f"{t}{b}": pload[n_h:] * f for b, f in split.items()},
        gas_load={f"{t}G{k}": v for k, v in gas.items()},
        heat_load={f"{t}H{k}": v for k, v in heat.items()},
        wind={f"{t}WT1": wind[n_h:]},
        history={
            f"{t}TPU1": tpu,
            f"{t}NGU1": ngu,
            f"{t}CHP1": chp_h,
            f"{t}HP1": hp,
            f"{t}GB1": gb,
            f"{t}GW1": gw1,
            f"{t}GW2": gw2,
        },
    )


def small(n_hist: int = 96, n_disp: int = 96, dt: float = 900.0) -> Scenario:
    """Desk-scale system: 9 buses, 7 gas nodes, 12 heat nodes, 24 h history + 24 h dispatch at 15 min."""
    hz = Horizon(n_hist, n_disp, dt)
    buses, lines, gnodes, gpipes, hnodes, hpipes, devices = _small_parts()
    gnodes[0].reference = True
    gnodes[0].p_ref = np.full(hz.n_t, 50 * BAR)
    sc = Scenario(
        "small",
        hz,
        Epn(buses, lines, slack="1"),
        Ngn(gnodes, gpipes),
        Dhn(hnodes, hpipes),
        devices,
        _small_series(hz),
    )
    validate(sc)
    return sc


def cascade(k: int, n_hist: int = 96, n_disp: int = 96, dt: float = 900.0) -> Scenario:
    """``k`` copies of the desk system chained by one tie line and one tie pipe per joint."""
    if k < 1:
        raise ValueError("cascade factor must be >= 1")
    hz = Horizon(n_hist, n_disp, dt)
    buses, lines, gnodes, gpipes, hnodes, hpipes, devices = [], [], [], [], [], [], []
    series = Series()
    for c in range(k):
        tag = f"c{c + 1}."
        b, l, gn, gp, hn, hp, dv = _small_parts(tag)
        gn[0].reference = True
        gn[0].p_ref = np.full(hz.n_t, 50 * BAR)
        buses += b
        lines += l
        gnodes += gn
        gpipes += gp
        hnodes += hn
        hpipes += hp
        devices += dv
        s = _small_series(hz, tag)
        for name in ("power_load", "gas_load", "heat_load", "wind", "history"):
            getattr(series, name).update(getattr(s, name))
        if c:
            prev = f"c{c}."
            lines.append(Line(f"tie{c}", f"{prev}5", f"{tag}4", 0.1, 100 * MW))
            gpipes.append(GasPipeSpec(f"tiepipe{c}", f"{prev}G3", f"{tag}G6", _gas_pipe(15e3, 0.3, 0.5)))
    sc = Scenario(f"cascade{k}x", hz, Epn(buses, lines, slack="c1.1"), Ngn(gnodes, gpipes), Dhn(hnodes, hpipes), devices, series)
    validate(sc)
    return sc


# ----------------------------------------------------------------- bundled

BUNDLED = {"micro": micro, "small": small}


def bundled(name: str) -> Scenario:
    """Load a bundled scenario from the package data (falls back to the generator)."""
    path = DATA / f"{name}.yaml"
    if path.exists():
        return load_scenario(path)
    if name in BUNDLED:
        return BUNDLED[name]()
    if name.startswith("cascade") and name.endswith("x"):
        return cascade(int(name[7:-1]))
    raise KeyError(f"unknown bundled scenario {name!r}")


def write_bundled(outdir: Path = DATA) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, make in BUNDLED.items():
        p = outdir / f"{name}.yaml"
        save_scenario(make(), p)
        paths.append(p)
    return paths
