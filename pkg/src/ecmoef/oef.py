"""Frequency-domain dispatch model: variables, rows and objective.

Time-domain device outputs live on the dispatch steps. Every device series
that couples into a pipe network also gets one-sided phasors over the full
historical + dispatch horizon; the two are tied together by synthesis rows,
with the historical samples entering as constants.

Three variants share the builders below:

``ecm``
    network equations in admittance form with explicit monitored
    pressure / temperature phasors and samples;
``vsp``
    monitored quantities eliminated, their bounds written as dense rows over
    the device phasors;
``raw``
    the ``vsp`` model without any security rows (the starting point of the
    cut loop in :mod:`ecmoef.compaction`).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .network import GasNetwork, HeatNetwork, compute_ptdf, gas_node_impedance, heat_node_impedance
from .qp import ModelError, ModelStats, QpModel
from .scenario import Scenario, validate
from .spectral import forward_dft, freedom_mask, inverse_dft, synthesis_rows

# time-domain blocks per device kind; the first one is the bounded/ramped output
TIME_BLOCKS = {
    "tpu": ("P_tpu",),
    "ngu": ("P_ngu", "m_ngu"),
    "chp": ("P_chp", "h_chp"),
    "wt": ("P_wt",),
    "hp": ("h_hp", "P_hp"),
    "gb": ("h_gb", "m_gb"),
    "gw": ("m_gw",),
}
# (block, kind, network, sign of the nodal injection)
FREQ_SERIES = (
    ("m_gw", "gw", "gas", 1.0),
    ("m_ngu", "ngu", "gas", -1.0),
    ("m_gb", "gb", "gas", -1.0),
    ("h_chp", "chp", "heat", 1.0),
    ("h_gb", "gb", "heat", 1.0),
    ("h_hp", "hp", "heat", 1.0),
)
# phasor series that carry the smoothing penalty
W2_SERIES = ("m_gw", "m_ngu", "m_gb", "h_chp", "h_hp")
# electric injection sign per kind
POWER_SIGN = {"tpu": ("P_tpu", 1.0), "ngu": ("P_ngu", 1.0), "chp": ("P_chp", 1.0), "wt": ("P_wt", 1.0), "hp": ("P_hp", -1.0)}
KINDS = tuple(TIME_BLOCKS)

_TINY = 1e-13


def _secondary_factor(kind: str, ratio: float) -> float:
    """Secondary block = factor * main block, from the coupling ratio."""
    return {"ngu": 1.0 / ratio, "chp": 1.0 / ratio, "hp": 1.0 / ratio, "gb": 1.0 / ratio}[kind]


def _history_of(kind: str, block: str, ratio, hist: np.ndarray) -> np.ndarray:
    """Historical values of a phasor series from the stored device history."""
    if kind == "ngu":  # history in power, m = P / r
        return hist / ratio
    if kind == "gb" and block == "m_gb":  # history in heat, h = r m
        return hist / ratio
    return hist


def _history_main(kind: str, ratio, hist: np.ndarray) -> np.ndarray:
    """Historical values of the ramped (main) quantity."""
    if kind == "chp":  # history in heat, P = r h
        return hist * ratio
    return hist


def _magnitude(lb: float, ub: float) -> float:
    m = max(abs(x) for x in (lb, ub) if np.isfinite(x)) if (np.isfinite(lb) or np.isfinite(ub)) else 1.0
    return m if m > 0 else 1.0


# ------------------------------------------------------------------ prepare


@dataclass
class Prepared:
    """Scenario data pushed through the network assembly, shared by all models."""

    sc: Scenario
    n_t: int
    n_f: int
    n_d: int
    n_h: int
    disp: np.ndarray
    mask: set
    devices: dict  # kind -> list[Device]
    bus_of: dict  # kind -> int array
    gas_of: dict
    heat_of: dict
    power_load: np.ndarray  # (n_bus, n_d)
    ptdf: np.ndarray  # (n_line, n_bus)
    line_limit: np.ndarray
    # gas
    gas: GasNetwork | None = None
    free: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    ref: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    Yg: np.ndarray | None = None  # (n_f, n_g, n_g)
    Zg: np.ndarray | None = None  # (n_f, n_g, n_g), zero on reference rows/cols
    Hg: np.ndarray | None = None  # (n_f, n_g, n_ref) pressure response to reference phasors
    p_ref: np.ndarray | None = None  # (n_ref, n_t)
    p_ref_f: np.ndarray | None = None  # (n_ref, n_f)
    gas_load: np.ndarray | None = None  # (n_g, n_t)
    gas_load_f: np.ndarray | None = None
    # heat
    heat: HeatNetwork | None = None
    phi: np.ndarray | None = None  # (n_f, n_b)
    Yh: np.ndarray | None = None  # (n_f, n_b, n_b)
    Mh: np.ndarray | None = None  # (n_f, n_h, n_b)
    Zh: np.ndarray | None = None  # (n_f, n_h, n_h)
    heat_load: np.ndarray | None = None
    heat_load_f: np.ndarray | None = None
    # history per phasor block: (n_dev, n_hist); last historical main output per kind
    history: dict = field(default_factory=dict)
    last_main: dict = field(default_factory=dict)
    prep_time: float = 0.0

    @property
    def W(self) -> np.ndarray:
        """Synthesis weights for the dispatch steps, (n_d, n_f)."""
        return synthesis_rows(self.n_t, self.disp)

    @property
    def n_gas(self) -> int:
        return len(self.sc.ngn.nodes)

    @property
    def n_heat(self) -> int:
        return len(self.sc.dhn.nodes)

    @property
    def n_branch(self) -> int:
        return len(self.sc.dhn.pipes)

    def p_bounds(self):
        nodes = self.sc.ngn.nodes
        return np.array([n.p_lb for n in nodes]), np.array([n.p_ub for n in nodes])

    def t_bounds(self):
        nodes = self.sc.dhn.nodes
        return np.array([n.t_lb for n in nodes]), np.array([n.t_ub for n in nodes])

    def reference_pressure(self) -> np.ndarray:
        """Absolute reference pressure samples on the dispatch steps, (n_ref, n_d)."""
        return self.p_ref[:, self.disp]


def prepare(sc: Scenario) -> Prepared:
    t0 = time.perf_counter()
    validate(sc)
    h = sc.horizon
    n_t, n_f = h.n_t, h.n_f
    bi, gi, hi = sc.bus_index(), sc.gas_index(), sc.heat_index()
    devices = {k: sc.of_kind(k) for k in KINDS}
    bus_of = {k: np.array([bi[d.bus] for d in v], dtype=int) if k in POWER_SIGN else None for k, v in devices.items()}
    gas_of = {k: np.array([gi[d.gas_node] for d in devices[k]], dtype=int) for k in ("gw", "ngu", "gb")}
    heat_of = {k: np.array([hi[d.heat_node] for d in devices[k]], dtype=int) for k in ("chp", "gb", "hp")}

    n_bus = len(sc.epn.buses)
    power_load = np.zeros((n_bus, h.n_disp))
    for b, arr in sc.series.power_load.items():
        power_load[bi[b]] += arr
    lines = sc.epn.lines
    if lines:
        ends = [(bi[l.frm], bi[l.to]) for l in lines]
        ptdf = compute_ptdf(n_bus, ends, [l.reactance for l in lines], sc.slack_bus())
    else:
        ptdf = np.zeros((0, n_bus))
    prep = Prepared(
        sc=sc,
        n_t=n_t,
        n_f=n_f,
        n_d=h.n_disp,
        n_h=h.n_hist,
        disp=h.dispatch_index,
        mask=freedom_mask(n_t),
        devices=devices,
        bus_of=bus_of,
        gas_of=gas_of,
        heat_of=heat_of,
        power_load=power_load,
        ptdf=ptdf,
        line_limit=np.array([l.limit for l in lines]),
    )
    omega = h.omega

    if sc.ngn.nodes:
        n_g = len(sc.ngn.nodes)
        ref = np.array(sc.reference_nodes(), dtype=int)
        net = GasNetwork(n_g, np.array([(gi[p.frm], gi[p.to]) for p in sc.ngn.pipes], dtype=int).reshape(-1, 2),
                         [p.pipe for p in sc.ngn.pipes], ref.tolist())
        Y = np.stack([net.admittance(w) for w in omega])
        Z = np.stack([gas_node_impedance(Yk, ref).Z for Yk in Y])
        free = net.free_nodes
        H = np.zeros((n_f, n_g, ref.size), dtype=complex)
        H[:, free, :] = -np.einsum("kij,kjr->kir", Z[:, free][:, :, free], Y[:, free][:, :, ref])
        p_ref = np.stack([sc.ngn.nodes[r].p_ref for r in ref])
        load = np.zeros((n_g, n_t))
        for name, arr in sc.series.gas_load.items():
            load[gi[name]] += arr
        prep.gas, prep.free, prep.ref, prep.Yg, prep.Zg, prep.Hg = net, free, ref, Y, Z, H
        prep.p_ref, prep.p_ref_f = p_ref, forward_dft(p_ref)
        prep.gas_load, prep.gas_load_f = load, forward_dft(load)

    if sc.dhn.nodes:
        n_h = len(sc.dhn.nodes)
        net = HeatNetwork(n_h, np.array([(hi[p.frm], hi[p.to]) for p in sc.dhn.pipes], dtype=int).reshape(-1, 2),
                          [p.pipe for p in sc.dhn.pipes])
        phi = net.factors(omega) if sc.dhn.pipes else np.zeros((n_f, 0), complex)
        Yh = np.stack([net.branch_admittance(phi[k]) for k in range(n_f)])
        Mh = np.stack([net.monitor_map(phi[k]) for k in range(n_f)])
        Zh = np.stack([heat_node_impedance(Yh[k], net.incidence.A_tilde, Mh[k]) for k in range(n_f)])
        load = np.zeros((n_h, n_t))
        for name, arr in sc.series.heat_load.items():
            load[hi[name]] += arr
        prep.heat, prep.phi, prep.Yh, prep.Mh, prep.Zh = net, phi, Yh, Mh, Zh
        prep.heat_load, prep.heat_load_f = load, forward_dft(load)

    for block, kind, _, _ in FREQ_SERIES:
        rows = []
        for d in devices[kind]:
            hist = sc.series.history.get(d.name, np.zeros(h.n_hist))
            rows.append(_history_of(kind, block, d.ratio, np.asarray(hist, float)))
        prep.history[block] = np.array(rows).reshape(len(devices[kind]), h.n_hist)
    for kind in KINDS:
        last = []
        for d in devices[kind]:
            hist = sc.series.history.get(d.name)
            last.append(_history_main(kind, d.ratio, hist)[-1] if hist is not None and len(hist) else np.nan)
        prep.last_main[kind] = np.array(last)
    prep.prep_time = time.perf_counter() - t0
    return prep


# --------------------------------------------------------------- row helper


def add_matrix(model: QpModel, cols, coef, lo, hi, label: str) -> int:
    """Add rows with per-row column lists: ``cols``/``coef`` of shape (k, w)."""
    cols = np.asarray(cols)
    coef = np.asarray(coef, float)
    coef = np.where(np.abs(coef) < _TINY * np.abs(coef).max(initial=0.0), 0.0, coef)
    k, w = coef.shape
    return model.add_rows(np.repeat(np.arange(k), w), cols.ravel(), coef.ravel(), lo, hi, label)


def _phasor_cols(F: np.ndarray):
    """(n_dev, n_f, 2) index block -> real and imaginary column arrays."""
    return F[..., 0], F[..., 1]


# ------------------------------------------------------------- variables


def add_device_vars(model: QpModel, prep: Prepared) -> dict:
    """Time-domain device outputs with their box bounds (wind capped by availability)."""
    sc = prep.sc
    out = {}
    for kind in KINDS:
        devs = prep.devices[kind]
        main = TIME_BLOCKS[kind][0]
        n = len(devs)
        lb = np.array([d.lb for d in devs]).reshape(n, 1) * np.ones((1, prep.n_d))
        ub = np.array([d.ub for d in devs]).reshape(n, 1) * np.ones((1, prep.n_d))
        if kind == "wt":
            for i, d in enumerate(devs):
                ub[i] = np.minimum(ub[i], sc.series.wind[d.name])
            lb = np.minimum(lb, ub)
        mag = np.array([_magnitude(d.lb, d.ub) for d in devs]).reshape(n, 1)
        out[main] = model.add_vars(main, (n, prep.n_d), lb, ub, np.broadcast_to(mag, (n, prep.n_d)))
        for block in TIME_BLOCKS[kind][1:]:
            f = np.array([_secondary_factor(kind, d.ratio) for d in devs]).reshape(n, 1)
            out[block] = model.add_vars(block, (n, prep.n_d), scale=np.broadcast_to(mag * f, (n, prep.n_d)))
    return out


def add_phasor_vars(model: QpModel, prep: Prepared, tv: dict) -> dict:
    """Phasors of every network-coupled device series, with freedom rows on the masked parts."""
    out = {}
    for block, kind, _, _ in FREQ_SERIES:
        n = len(prep.devices[kind])
        s = model.scale[tv[block][:, 0]] if n else np.zeros(0)
        F = model.add_vars("F_" + block, (n, prep.n_f, 2), scale=np.broadcast_to(s[:, None, None], (n, prep.n_f, 2)))
        out[block] = F
        add_freedom_rows(model, prep, F)
    return out


def add_freedom_rows(model: QpModel, prep: Prepared, F: np.ndarray) -> None:
    if F.shape[0] == 0:
        return
    cols = F[:, sorted(prep.mask), 1].ravel()
    model.add_rows(np.arange(cols.size), cols, np.ones(cols.size), 0.0, 0.0, "freedom")


# ------------------------------------------------------------- constraints


def add_coupling_rows(model: QpModel, prep: Prepared, tv: dict) -> None:
    # ngu: r m - P = 0; chp: r h - P = 0; gb: r m - h = 0; hp: r P - h = 0
    pairs = {"ngu": ("m_ngu", "P_ngu"), "chp": ("h_chp", "P_chp"), "gb": ("m_gb", "h_gb"), "hp": ("P_hp", "h_hp")}
    for kind, (a, b) in pairs.items():
        devs = prep.devices[kind]
        if not devs:
            continue
        r = np.array([d.ratio for d in devs])[:, None] * np.ones((1, prep.n_d))
        cols = np.stack([tv[a].ravel(), tv[b].ravel()], axis=1)
        coef = np.stack([r.ravel(), -np.ones(r.size)], axis=1)
        add_matrix(model, cols, coef, 0.0, 0.0, "coupling")


def add_ramp_rows(model: QpModel, prep: Prepared, tv: dict) -> None:
    for kind in KINDS:
        main = TIME_BLOCKS[kind][0]
        for i, d in enumerate(prep.devices[kind]):
            up, dn = d.ramp_up, d.ramp_down
            if not (np.isfinite(up) or np.isfinite(dn)):
                continue
            x = tv[main][i]
            cols = np.stack([x[1:], x[:-1]], axis=1)
            coef = np.tile([1.0, -1.0], (prep.n_d - 1, 1))
            if cols.size:
                add_matrix(model, cols, coef, -dn, up, "ramping")
            last = prep.last_main[kind][i]
            if np.isfinite(last):
                model.add_rows([0], [x[0]], [1.0], last - dn, last + up, "ramping")


def add_tf_rows(model: QpModel, prep: Prepared, tv: dict, fv: dict) -> None:
    """Synthesis rows: historical samples equal the stored history, dispatch samples the time variables."""
    S = synthesis_rows(prep.n_t)
    Sre, Sim = S.real.copy(), -S.imag
    Sim[:, sorted(prep.mask)] = 0.0
    coef_f = np.concatenate([Sre, Sim], axis=1)  # (n_t, 2 n_f)
    for block, kind, _, _ in FREQ_SERIES:
        F = fv[block]
        for i in range(F.shape[0]):
            fcols = np.concatenate([F[i, :, 0], F[i, :, 1]])
            if prep.n_h:
                hist = prep.history[block][i]
                add_matrix(model, np.tile(fcols, (prep.n_h, 1)), coef_f[: prep.n_h], hist, hist, "historical-boundary")
            cols = np.concatenate([np.tile(fcols, (prep.n_d, 1)), tv[block][i][:, None]], axis=1)
            coef = np.concatenate([coef_f[prep.n_h :], -np.ones((prep.n_d, 1))], axis=1)
            add_matrix(model, cols, coef, 0.0, 0.0, "tf-conversion")


def power_injection_terms(prep: Prepared, tv: dict):
    """Columns, buses and signs of every electric injection (per dispatch step slice)."""
    cols, bus, sign = [], [], []
    for kind, (block, sg) in POWER_SIGN.items():
        for i in range(len(prep.devices[kind])):
            cols.append(tv[block][i])
            bus.append(prep.bus_of[kind][i])
            sign.append(sg)
    if not cols:
        return np.zeros((0, prep.n_d), int), np.zeros(0, int), np.zeros(0)
    return np.array(cols), np.array(bus), np.array(sign)


def add_balance_rows(model: QpModel, prep: Prepared, tv: dict) -> None:
    cols, _, sign = power_injection_terms(prep, tv)
    demand = prep.power_load.sum(axis=0)
    if cols.size or np.any(demand):
        model.add_rows(
            np.tile(np.arange(prep.n_d), len(sign)), cols.ravel(), np.repeat(sign, prep.n_d), demand, demand, "balance"
        )
    # horizon totals
    if prep.gas is not None:
        c, v = [], []
        for block, kind, net, sg in FREQ_SERIES:
            if net == "gas" and tv[block].size:
                c.append(tv[block].ravel())
                v.append(np.full(tv[block].size, sg))
        total = prep.gas_load[:, prep.disp].sum()
        c = np.concatenate(c) if c else np.zeros(0, int)
        model.add_rows(np.zeros(c.size, int), c, np.concatenate(v) if v else [], total, total, "balance")
    if prep.heat is not None:
        c = [tv[b].ravel() for b in ("h_chp", "h_gb", "h_hp") if tv[b].size]
        total = prep.heat_load[:, prep.disp].sum()
        c = np.concatenate(c) if c else np.zeros(0, int)
        model.add_rows(np.zeros(c.size, int), c, np.ones(c.size), total, np.inf, "balance")


def epn_rows(prep: Prepared, tv: dict, lines, taus):
    """Line-flow rows: returns (cols (k,w), coef (k,w), lo, hi, keys)."""
    cols, bus, sign = power_injection_terms(prep, tv)
    if cols.shape[0] == 0:
        return np.zeros((0, 0), int), np.zeros((0, 0)), np.zeros(0), np.zeros(0), []
    base = prep.ptdf @ prep.power_load  # flow caused by the loads, sign flipped below
    out_c, out_v, lo, hi, keys = [], [], [], [], []
    for l in lines:
        lim = prep.line_limit[l]
        if not np.isfinite(lim):
            continue
        coef = prep.ptdf[l, bus] * sign
        for t in taus:
            out_c.append(cols[:, t])
            out_v.append(coef)
            lo.append(-lim + base[l, t])
            hi.append(lim + base[l, t])
            keys.append((l, t))
    w = cols.shape[0]
    return (np.array(out_c).reshape(-1, w), np.array(out_v).reshape(-1, w), np.array(lo), np.array(hi), keys)


def add_epn_security(model: QpModel, prep: Prepared, tv: dict) -> None:
    cols, coef, lo, hi, _ = epn_rows(prep, tv, range(prep.ptdf.shape[0]), range(prep.n_d))
    if len(lo):
        add_matrix(model, cols, coef, lo, hi, "epn-security")


# ------------------------------------------------------------- ECM network rows


def _node_terms(prep: Prepared, fv: dict, net: str):
    """Per network node: list of (phasor block index array (n_f,2), sign)."""
    n = prep.n_gas if net == "gas" else prep.n_heat
    where = prep.gas_of if net == "gas" else prep.heat_of
    terms = [[] for _ in range(n)]
    for block, kind, nt, sg in FREQ_SERIES:
        if nt != net:
            continue
        for i, node in enumerate(where[kind]):
            terms[node].append((fv[block][i], sg))
    return terms


def _injection_scale(model: QpModel, prep: Prepared, fv: dict, net: str) -> np.ndarray:
    """Rough nodal injection magnitude per frequency, (n_nodes, n_f)."""
    load = prep.gas_load_f if net == "gas" else prep.heat_load_f
    out = np.abs(load).copy()
    for i, node_terms in enumerate(_node_terms(prep, fv, net)):
        for Fd, _ in node_terms:
            out[i] += model.scale[Fd[:, 0]]
    return out


def _phasor_scale(resp: np.ndarray, floor: float) -> np.ndarray:
    # per-frequency response magnitudes; the rows are renormalised later anyway
    top = float(resp.max(initial=0.0))
    return np.maximum(resp, max(1e-6 * top, floor))[..., None].repeat(2, axis=-1)


def add_gas_monitored(model: QpModel, prep: Prepared, fv: dict) -> dict:
    """Pressure phasors/samples of the free nodes, admittance rows, synthesis rows and bounds."""
    free, nfr = prep.free, prep.free.size
    if nfr == 0:
        return {}
    pscale = float(np.abs(prep.p_ref).max()) or 1.0
    inj = _injection_scale(model, prep, fv, "gas")
    resp = np.einsum("kij,jk->ik", np.abs(prep.Zg), inj) + np.einsum("kir,rk->ik", np.abs(prep.Hg), np.abs(prep.p_ref_f))
    Fp = model.add_vars("F_p", (nfr, prep.n_f, 2), scale=_phasor_scale(resp[free], 1e-9 * pscale))
    p = model.add_vars("p", (nfr, prep.n_d), scale=pscale)
    terms = _node_terms(prep, fv, "gas")
    pos = {int(g): j for j, g in enumerate(free)}
    for k in range(prep.n_f):
        Y = prep.Yg[k]
        rhs = -prep.gas_load_f[:, k] - prep.Yg[k][:, prep.ref] @ prep.p_ref_f[:, k]
        rows, cols, vals, lo = [], [], [], []
        r = 0
        for i in free:
            nz = [j for j in free if Y[i, j] != 0]
            for part in (0, 1):
                for j in nz:
                    y = Y[i, j]
                    pj = Fp[pos[int(j)], k]
                    if part == 0:  # Re(Y p) = Yr pr - Yi pi
                        cols += [pj[0], pj[1]]
                        vals += [y.real, -y.imag]
                    else:  # Im(Y p) = Yi pr + Yr pi
                        cols += [pj[0], pj[1]]
                        vals += [y.imag, y.real]
                    rows += [r, r]
                for Fd, sg in terms[i]:
                    rows.append(r)
                    cols.append(Fd[k, part])
                    vals.append(-sg)
                lo.append(rhs[i].real if part == 0 else rhs[i].imag)
                r += 1
        model.add_rows(rows, cols, vals, lo, lo, "ngn-circuit")
    add_monitored_synthesis(model, prep, Fp, p)
    lb, ub = prep.p_bounds()
    _add_box(model, p, lb[free], ub[free], "ngn-security")
    return {"F_p": Fp, "p": p}


def add_heat_monitored(model: QpModel, prep: Prepared, fv: dict) -> dict:
    """Branch-head and node temperature phasors, circuit rows, synthesis rows and bounds."""
    n_h, n_b = prep.n_heat, prep.n_branch
    lb_t, ub_t = prep.t_bounds()
    fin = np.concatenate([np.abs(lb_t[np.isfinite(lb_t)]), np.abs(ub_t[np.isfinite(ub_t)])])
    tscale = float(fin.max()) if fin.size and fin.max() > 0 else 10.0
    inj = _injection_scale(model, prep, fv, "heat")
    At = prep.heat.incidence.A_tilde
    Zb = np.stack([np.linalg.solve(prep.Yh[k], At.T) for k in range(prep.n_f)]) if n_b else np.zeros((prep.n_f, 0, n_h))
    Fb = model.add_vars("F_Tbf", (n_b, prep.n_f, 2), scale=_phasor_scale(np.einsum("kij,jk->ik", np.abs(Zb), inj), 1e-9 * tscale))
    FT = model.add_vars("F_T", (n_h, prep.n_f, 2), scale=_phasor_scale(np.einsum("kij,jk->ik", np.abs(prep.Zh), inj), 1e-9 * tscale))
    T = model.add_vars("T", (n_h, prep.n_d), scale=tscale)
    terms = _node_terms(prep, fv, "heat")
    for k in range(prep.n_f):
        Y, M = prep.Yh[k], prep.Mh[k]
        rhs = At.T @ prep.heat_load_f[:, k]
        rows, cols, vals, lo = [], [], [], []
        r = 0
        # A~+^T (h_dev - h_load) = Y T_bf
        for b in range(n_b):
            for part in (0, 1):
                for i in np.flatnonzero(At[:, b]):
                    for Fd, sg in terms[i]:
                        rows.append(r)
                        cols.append(Fd[k, part])
                        vals.append(At[i, b] * sg)
                for j in np.flatnonzero(Y[b]):
                    y = -Y[b, j]
                    rows += [r, r]
                    cols += [Fb[j, k, 0], Fb[j, k, 1]]
                    vals += [y.real, -y.imag] if part == 0 else [y.imag, y.real]
                lo.append(rhs[b].real if part == 0 else rhs[b].imag)
                r += 1
        # T_n = M T_bf
        for i in range(n_h):
            for part in (0, 1):
                rows.append(r)
                cols.append(FT[i, k, part])
                vals.append(1.0)
                for j in np.flatnonzero(M[i]):
                    m = -M[i, j]
                    rows += [r, r]
                    cols += [Fb[j, k, 0], Fb[j, k, 1]]
                    vals += [m.real, -m.imag] if part == 0 else [m.imag, m.real]
                lo.append(0.0)
                r += 1
        model.add_rows(rows, cols, vals, lo, lo, "dhn-circuit")
    add_monitored_synthesis(model, prep, FT, T)
    _add_box(model, T, lb_t, ub_t, "dhn-security")
    return {"F_Tbf": Fb, "F_T": FT, "T": T}


def add_monitored_synthesis(model: QpModel, prep: Prepared, F: np.ndarray, x: np.ndarray) -> None:
    S = synthesis_rows(prep.n_t, prep.disp)
    coef_f = np.concatenate([S.real, -S.imag], axis=1)
    coef = np.concatenate([coef_f, -np.ones((prep.n_d, 1))], axis=1)
    for i in range(F.shape[0]):
        fcols = np.concatenate([F[i, :, 0], F[i, :, 1]])
        cols = np.concatenate([np.tile(fcols, (prep.n_d, 1)), x[i][:, None]], axis=1)
        add_matrix(model, cols, coef, 0.0, 0.0, "tf-conversion")


def _add_box(model: QpModel, x: np.ndarray, lb, ub, label: str) -> None:
    n, nd = x.shape
    lo = np.repeat(np.asarray(lb, float), nd)
    hi = np.repeat(np.asarray(ub, float), nd)
    model.add_rows(np.arange(n * nd), x.ravel(), np.ones(n * nd), lo, hi, label)


# --------------------------------------------------------- projected rows


@dataclass
class Projection:
    """Monitored samples as affine functions of the device phasors.

    ``value[i, t] = const[i, t] + re[i, t] . Re(F) + im[i, t] . Im(F)`` with the
    phasor columns listed in ``cols_re`` / ``cols_im`` (freq x device).
    """

    nodes: np.ndarray
    const: np.ndarray  # (n_nodes, n_d)
    re: np.ndarray  # (n_nodes, n_d, n_f, n_dev)
    im: np.ndarray
    cols_re: np.ndarray  # (n_f, n_dev)
    cols_im: np.ndarray

    def row(self, i: int, t: int):
        cols = np.concatenate([self.cols_re.ravel(), self.cols_im.ravel()])
        coef = np.concatenate([self.re[i, t].ravel(), self.im[i, t].ravel()])
        return cols, coef


def _signed_columns(prep: Prepared, fv: dict, net: str):
    where = prep.gas_of if net == "gas" else prep.heat_of
    nodes, signs, blocks = [], [], []
    for block, kind, nt, sg in FREQ_SERIES:
        if nt != net:
            continue
        for i, node in enumerate(where[kind]):
            nodes.append(node)
            signs.append(sg)
            blocks.append(fv[block][i] if fv is not None else np.zeros((prep.n_f, 2), int))
    if not blocks:
        return np.zeros(0, int), np.zeros(0), np.zeros((prep.n_f, 0, 2), int)
    return np.array(nodes), np.array(signs), np.stack(blocks, axis=1)


def project(prep: Prepared, fv: dict | None, net: str) -> Projection:
    """Impedance-form projection of node pressures (free nodes) or temperatures."""
    W = prep.W
    dnodes, signs, F = _signed_columns(prep, fv, net)
    if net == "gas":
        nodes = prep.free
        Z = prep.Zg[:, nodes, :]
        base = -np.einsum("kij,jk->ik", Z, prep.gas_load_f) + np.einsum("kir,rk->ik", prep.Hg[:, nodes, :], prep.p_ref_f)
    else:
        nodes = np.arange(prep.n_heat)
        Z = prep.Zh
        base = -np.einsum("kij,jk->ik", Z, prep.heat_load_f)
    const = (base @ W.T).real
    Zsel = Z[:, :, dnodes] * signs[None, None, :]
    re, im = kernels.projection(W, Zsel)
    im[:, :, sorted(prep.mask), :] = 0.0
    return Projection(nodes, const, re, im, F[..., 0], F[..., 1])


def projected_rows(proj: Projection, lb, ub, targets, tol_zero: float = _TINY):
    """Rows for (node position, tau) targets: (cols, coef (k,w), lo, hi)."""
    cols = np.concatenate([proj.cols_re.ravel(), proj.cols_im.ravel()])
    if not targets:
        return cols, np.zeros((0, cols.size)), np.zeros(0), np.zeros(0)
    ii = np.array([t[0] for t in targets])
    tt = np.array([t[1] for t in targets])
    coef = np.concatenate([proj.re[ii, tt].reshape(len(targets), -1), proj.im[ii, tt].reshape(len(targets), -1)], axis=1)
    c = proj.const[ii, tt]
    return cols, coef, np.asarray(lb)[ii] - c, np.asarray(ub)[ii] - c


def add_projected_security(model: QpModel, prep: Prepared, fv: dict, net: str, proj: Projection | None = None) -> Projection:
    proj = proj or project(prep, fv, net)
    if net == "gas":
        lb, ub = prep.p_bounds()
        lb, ub = lb[proj.nodes], ub[proj.nodes]
    else:
        lb, ub = prep.t_bounds()
    targets = [(i, t) for i in range(len(proj.nodes)) if np.isfinite(lb[i]) or np.isfinite(ub[i]) for t in range(prep.n_d)]
    cols, coef, lo, hi = projected_rows(proj, lb, ub, targets)
    if len(targets):
        add_matrix(model, np.broadcast_to(cols, coef.shape), coef, lo, hi, "ngn-security" if net == "gas" else "dhn-security")
    return proj


# ---------------------------------------------------------------- objective


def default_epsilon(prep: Prepared) -> float:
    """Smoothing weight: tiny against the linear costs, in cost per squared output unit."""
    u1 = [c[1] for d in prep.sc.devices for c in (d.cost, d.cost_heat) if c[1] > 0]
    med = float(np.median(u1)) if u1 else 1.0
    caps = [d.ub for block, kind, _, _ in FREQ_SERIES for d in prep.devices[kind] if np.isfinite(d.ub) and d.ub > 0]
    cap = max(caps) if caps else 1.0
    return 1e-6 * med * prep.n_d / cap


def add_objective(model: QpModel, prep: Prepared, tv: dict, fv: dict | None, epsilon: float | None) -> float:
    """W1 on the dispatch outputs, W2 on the phasors. Returns the epsilon used."""
    for kind in KINDS:
        main = TIME_BLOCKS[kind][0]
        for i, d in enumerate(prep.devices[kind]):
            u2, u1, u0 = d.cost
            model.add_objective(tv[main][i], linear=u1, quad=u2, const=u0 * prep.n_d)
            if kind == "chp":
                h2, h1, h0 = d.cost_heat
                model.add_objective(tv["h_chp"][i], linear=h1, quad=h2, const=h0 * prep.n_d)
    if fv is None:
        return 0.0
    eps = default_epsilon(prep) if epsilon is None else float(epsilon)
    if not eps > 0:
        raise ModelError("epsilon must be positive")
    kappa = np.arange(prep.n_f, dtype=float)
    for block in W2_SERIES:
        F = fv[block]
        if F.size:
            w = np.broadcast_to((eps * kappa)[None, :, None], F.shape)
            model.add_objective(F, quad=w)
    return eps


# ------------------------------------------------------------------ models


@dataclass
class Built:
    model: QpModel
    prep: Prepared
    time_vars: dict
    phasor_vars: dict
    monitored: dict
    epsilon: float
    projections: dict
    build_time: float


def build(prep: Prepared, variant: str = "ecm", epsilon: float | None = None) -> Built:
    if variant not in ("ecm", "vsp", "raw"):
        raise ValueError(f"unknown model variant {variant!r}")
    t0 = time.perf_counter()
    sc = prep.sc
    model = QpModel(f"{sc.name}:{variant}")
    tv = add_device_vars(model, prep)
    fv = add_phasor_vars(model, prep, tv)
    add_ramp_rows(model, prep, tv)
    add_coupling_rows(model, prep, tv)
    add_balance_rows(model, prep, tv)
    add_tf_rows(model, prep, tv, fv)
    mon, proj = {}, {}
    if variant != "raw":
        add_epn_security(model, prep, tv)
    if variant == "ecm":
        if prep.gas is not None:
            mon.update(add_gas_monitored(model, prep, fv))
        if prep.heat is not None:
            mon.update(add_heat_monitored(model, prep, fv))
    elif variant == "vsp":
        if prep.gas is not None and prep.free.size:
            proj["gas"] = add_projected_security(model, prep, fv, "gas")
        if prep.heat is not None:
            proj["heat"] = add_projected_security(model, prep, fv, "heat")
    eps = add_objective(model, prep, tv, fv, epsilon if epsilon is not None else sc.solver.epsilon)
    model.compile()
    return Built(model, prep, tv, fv, mon, eps, proj, time.perf_counter() - t0)


def assemble_ecm_model(sc_or_prep, epsilon: float | None = None) -> Built:
    prep = sc_or_prep if isinstance(sc_or_prep, Prepared) else prepare(sc_or_prep)
    return build(prep, "ecm", epsilon)


# ---------------------------------------------------------------- solution


@dataclass
class DispatchSolution:
    method: str
    status: str
    objective: float | None
    w1: float | None
    w2: float | None
    schedules: dict  # block -> (n_dev, n_d)
    phasors: dict  # block -> complex (n_dev, n_f)
    monitored: object | None  # flowcalc.MonitoredState
    timing: dict
    stats: ModelStats | None = None
    dft_error: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def w1_value(prep: Prepared, schedules: dict) -> float:
    total = 0.0
    for kind in KINDS:
        main = TIME_BLOCKS[kind][0]
        for i, d in enumerate(prep.devices[kind]):
            x = schedules[main][i]
            u2, u1, u0 = d.cost
            total += float(np.sum(u2 * x * x + u1 * x + u0))
            if kind == "chp":
                h = schedules["h_chp"][i]
                h2, h1, h0 = d.cost_heat
                total += float(np.sum(h2 * h * h + h1 * h + h0))
    return total


def w2_value(prep: Prepared, phasors: dict, eps: float) -> float:
    kappa = np.arange(prep.n_f)
    return float(sum(eps * np.sum(kappa[None, :] * np.abs(phasors[b]) ** 2) for b in W2_SERIES if phasors[b].size))


def merged_series(prep: Prepared, block: str, schedule: np.ndarray) -> np.ndarray:
    """History followed by the dispatch schedule, (n_dev, n_t)."""
    return np.concatenate([prep.history[block], schedule], axis=1)


def dft_pair_error(prep: Prepared, schedules: dict, phasors: dict) -> float:
    """Worst mismatch between stored phasors and the merged series, relative to the series scale."""
    worst = 0.0
    for block, _, _, _ in FREQ_SERIES:
        c = phasors[block]
        if not c.size:
            continue
        x = merged_series(prep, block, schedules[block])
        scale = np.maximum(np.abs(x).max(axis=1, keepdims=True), 1.0)
        worst = max(worst, float((np.abs(inverse_dft(c, prep.n_t) - x) / scale).max()))
        worst = max(worst, float((np.abs(forward_dft(x) - c) / scale).max()))
    return worst


def extract(built: Built, x: np.ndarray) -> tuple[dict, dict]:
    m = built.model
    schedules = {b: m.value(x, b) for b in built.time_vars}
    phasors = {b: (x[F[..., 0]] + 1j * x[F[..., 1]]) for b, F in built.phasor_vars.items()}
    return schedules, phasors


def solution_from(built: Built, res, method: str, timing: dict, monitored=None) -> DispatchSolution:
    from .qp import stats

    if not res.ok:
        return DispatchSolution(method, res.status, None, None, None, {}, {}, None, timing, stats(built.model), info=dict(res.info))
    schedules, phasors = extract(built, res.x)
    prep = built.prep
    w1 = w1_value(prep, schedules)
    w2 = w2_value(prep, phasors, built.epsilon)
    if monitored is None:
        from .flowcalc import evaluate_solution

        monitored = evaluate_solution(prep, schedules, phasors)
    return DispatchSolution(
        method,
        res.status,
        float(res.objective),
        w1,
        w2,
        schedules,
        phasors,
        monitored,
        timing,
        stats(built.model),
        dft_pair_error(prep, schedules, phasors),
        info=dict(res.info),
    )


def solve_variant(sc_or_prep, variant: str, epsilon: float | None = None, tol: float | None = None) -> tuple[DispatchSolution, Built]:
    """Assemble one model variant and solve it directly (no cut loop)."""
    from .qp import solve

    t0 = time.perf_counter()
    prep = sc_or_prep if isinstance(sc_or_prep, Prepared) else prepare(sc_or_prep)
    built = build(prep, variant, epsilon)
    t_model = time.perf_counter() - t0
    res = solve(built.model, tol=tol or prep.sc.solver.tol)
    t1 = time.perf_counter()
    method = {"ecm": "ecm", "vsp": "ecm-vsp", "raw": "raw"}[variant]
    timing = {"modeling": t_model, "optimizing": res.solve_time, "security": 0.0}
    sol = solution_from(built, res, method, timing)
    timing["security"] = time.perf_counter() - t1
    timing["total"] = time.perf_counter() - t0
    return sol, built
