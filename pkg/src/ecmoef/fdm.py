"""Finite-difference baseline: mesh discretisation, forward simulation, dispatch model.

Gas pipes use a box scheme (implicit Euler in time, cell-centred differences
in space) on the same linearised equations as the circuit model. Heat pipes
use implicit Euler with upwind differences. Pipe ends are tied to node
variables by equality rows; node mixing follows the same rules as the
frequency-domain heat model.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .network import GasNetwork, HeatNetwork, NetworkError
from .qp import ModelError, QpModel, solve, stats


@dataclass(frozen=True)
class MeshConfig:
    dx_gas: float = 200.0
    dx_heat: float = 100.0
    dt: float | None = None  # defaults to the scenario step

    def __post_init__(self):
        for name in ("dx_gas", "dx_heat"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")

    @classmethod
    def from_scenario(cls, sc, **overrides) -> "MeshConfig":
        kw = {"dx_gas": sc.solver.dx_gas, "dx_heat": sc.solver.dx_heat, "dt": sc.horizon.dt}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


def n_segments(length: float, dx: float) -> int:
    return max(1, math.ceil(length / dx - 1e-9))


# ------------------------------------------------------------------- gas


@dataclass
class GasMesh:
    """Unknowns per step: pipe blocks ``[p(0..N), m(0..N)]`` then the node pressures."""

    net: GasNetwork
    dt: float
    n_seg: np.ndarray
    offsets: np.ndarray
    dx: np.ndarray
    A_new: sp.csr_matrix
    A_old: sp.csr_matrix  # only the stencil rows are non-zero
    node_row: np.ndarray  # balance row (free node) or pinning row (reference)

    @property
    def n_mesh(self) -> int:
        return int(2 * (self.n_seg + 1).sum())

    @property
    def n(self) -> int:
        return self.n_mesh + self.net.n_nodes

    def node_col(self, i) -> np.ndarray:
        return self.n_mesh + np.asarray(i)

    def pressure_cols(self, k: int) -> np.ndarray:
        return self.offsets[k] + np.arange(self.n_seg[k] + 1)

    def flow_cols(self, k: int) -> np.ndarray:
        return self.offsets[k] + self.n_seg[k] + 1 + np.arange(self.n_seg[k] + 1)

    def rhs(self, inj: np.ndarray, p_ref: np.ndarray) -> np.ndarray:
        """Boundary part of the right-hand side for one step."""
        b = np.zeros(self.n)
        free = self.net.free_nodes
        b[self.node_row[free]] = inj[free]
        b[self.node_row[self.net.reference]] = p_ref
        return b


def discretize_gas(net: GasNetwork, dx: float, dt: float) -> GasMesh:
    """Stencil, end-tie, nodal-balance and reference rows of a gas network."""
    if not (dx > 0 and dt > 0):
        raise ValueError("mesh steps must be positive")
    n_seg = np.array([n_segments(p.length, dx) for p in net.pipes], dtype=np.int64)
    size = 2 * (n_seg + 1)
    offsets = np.concatenate([[0], np.cumsum(size)[:-1]]).astype(np.int64)
    dxs = np.array([p.length for p in net.pipes]) / np.maximum(n_seg, 1)
    lines = net.lines
    R, L, C, K = (np.array([getattr(l, a) for l in lines], dtype=float) for a in "RLCK")
    rn, cn, vn, ro, co, vo = kernels.gas_stencil(n_seg, offsets, dxs, R, L, C, K, dt)
    n_mesh = int(size.sum())
    n = n_mesh + net.n_nodes
    rows, cols, vals = [rn], [cn], [vn]
    r = 2 * int(n_seg.sum())
    # pipe ends equal their node pressures
    for k, (i, j) in enumerate(net.ends):
        p0 = offsets[k]
        pN = offsets[k] + n_seg[k]
        rows.append(np.array([r, r, r + 1, r + 1]))
        cols.append(np.array([p0, n_mesh + i, pN, n_mesh + j]))
        vals.append(np.array([1.0, -1.0, 1.0, -1.0]))
        r += 2
    node_row = np.arange(r, r + net.n_nodes)
    ref = set(int(x) for x in net.reference)
    for i in range(net.n_nodes):
        if i in ref:
            rows.append(np.array([node_row[i]]))
            cols.append(np.array([n_mesh + i]))
            vals.append(np.array([1.0]))
            continue
        # injection = flow leaving through pipe heads - flow arriving at pipe tails
        for k, (a, b) in enumerate(net.ends):
            if a == i:
                rows.append(np.array([node_row[i]]))
                cols.append(np.array([offsets[k] + n_seg[k] + 1]))
                vals.append(np.array([1.0]))
            if b == i:
                rows.append(np.array([node_row[i]]))
                cols.append(np.array([offsets[k] + 2 * n_seg[k] + 1]))
                vals.append(np.array([-1.0]))
    A_new = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    A_old = sp.csr_matrix((vo, (ro, co)), shape=(n, n))
    return GasMesh(net, dt, n_seg, offsets, dxs, A_new, A_old, node_row)


# ------------------------------------------------------------------- heat


@dataclass
class HeatMesh:
    """Unknowns per step: pipe temperatures ``T(0..N)`` then the node temperatures."""

    net: HeatNetwork
    dt: float
    n_seg: np.ndarray
    offsets: np.ndarray
    dx: np.ndarray
    courant: np.ndarray
    decay: np.ndarray
    A_new: sp.csr_matrix
    A_old: sp.csr_matrix
    node_row: np.ndarray
    inj_gain: np.ndarray  # K per W of injection at each node (0 at terminal nodes)
    order: list | None = None  # topological node order, None when the flow graph has a cycle

    @property
    def n_mesh(self) -> int:
        return int((self.n_seg + 1).sum())

    @property
    def n(self) -> int:
        return self.n_mesh + self.net.n_nodes

    def node_col(self, i) -> np.ndarray:
        return self.n_mesh + np.asarray(i)

    def pipe_cols(self, k: int) -> np.ndarray:
        return self.offsets[k] + np.arange(self.n_seg[k] + 1)

    def rhs(self, inj: np.ndarray) -> np.ndarray:
        b = np.zeros(self.n)
        b[self.node_row] = self.inj_gain * inj
        return b


def _topological(n_nodes: int, ends) -> list | None:
    indeg = np.zeros(n_nodes, int)
    for _, b in ends:
        indeg[b] += 1
    ready = [i for i in range(n_nodes) if indeg[i] == 0]
    order = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for a, b in ends:
            if a == i:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(int(b))
    return order if len(order) == n_nodes else None


def discretize_heat(net: HeatNetwork, dx: float, dt: float) -> HeatMesh:
    """Upwind stencil, inlet ties and node mixing rows of a heat network."""
    if not (dx > 0 and dt > 0):
        raise ValueError("mesh steps must be positive")
    pipes = net.pipes
    n_seg = np.array([n_segments(p.length, dx) for p in pipes], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(n_seg + 1)[:-1]]).astype(np.int64)
    dxs = np.array([p.length for p in pipes]) / np.maximum(n_seg, 1)
    v = np.array([p.mass_flow / (p.density * p.area) for p in pipes])
    beta = np.array([p.loss / (p.specific_heat * p.density * p.area) for p in pipes])
    courant = v * dt / dxs
    decay = beta * dt
    n_mesh = int((n_seg + 1).sum())
    n = n_mesh + net.n_nodes
    rows, cols, vals, ro, co = [], [], [], [], []
    r = 0
    for k, (i, _) in enumerate(net.ends):
        base = offsets[k]
        idx = base + np.arange(1, n_seg[k] + 1)
        rr = r + np.arange(n_seg[k])
        rows += [rr, rr]
        cols += [idx, idx - 1]
        vals += [np.full(idx.size, 1.0 + courant[k] + decay[k]), np.full(idx.size, -courant[k])]
        ro.append(rr)
        co.append(idx)
        r += n_seg[k]
        rows.append(np.array([r, r]))
        cols.append(np.array([base, n_mesh + i]))
        vals.append(np.array([1.0, -1.0]))
        r += 1
    node_row = np.arange(r, r + net.n_nodes)
    flows = np.array([p.mass_flow for p in pipes])
    cp = np.array([p.specific_heat for p in pipes])
    out_flow = net.incidence.A_plus @ (flows * cp)
    gain = np.zeros(net.n_nodes)
    for i in range(net.n_nodes):
        rows.append(np.array([node_row[i]]))
        cols.append(np.array([n_mesh + i]))
        vals.append(np.array([1.0]))
        arriving = np.flatnonzero(net.ends[:, 1] == i)
        if out_flow[i] > 0:
            gain[i] = 1.0 / out_flow[i]
            w = flows[arriving] * cp[arriving] / out_flow[i]
        elif arriving.size:
            w = net.arrival_weights[i, arriving]
        else:
            raise NetworkError(f"heat node {i} has no pipes")
        for k, wk in zip(arriving, w):
            rows.append(np.array([node_row[i]]))
            cols.append(np.array([offsets[k] + n_seg[k]]))
            vals.append(np.array([-wk]))
    A_new = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    ro = np.concatenate(ro) if ro else np.zeros(0, int)
    co = np.concatenate(co) if co else np.zeros(0, int)
    A_old = sp.csr_matrix((np.ones(ro.size), (ro, co)), shape=(n, n))
    return HeatMesh(net, dt, n_seg, offsets, dxs, courant, decay, A_new, A_old, node_row, gain, _topological(net.n_nodes, net.ends))


# ------------------------------------------------------------- simulation


@dataclass
class MeshState:
    """Time evolution of every mesh point; arrays are (points, steps)."""

    gas_p: list = field(default_factory=list)
    gas_m: list = field(default_factory=list)
    node_p: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    heat_T: list = field(default_factory=list)
    node_T: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    z_gas: np.ndarray | None = None
    z_heat: np.ndarray | None = None


def _factor(A: sp.csr_matrix):
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise NetworkError(f"singular stencil matrix: {exc}") from exc
    if not np.all(np.isfinite(lu.U.data)) or np.any(lu.U.diagonal() == 0):
        raise NetworkError("singular stencil matrix")
    return lu


def steady_gas(gm: GasMesh, inj: np.ndarray, p_ref: np.ndarray) -> np.ndarray:
    return _factor(gm.A_new - gm.A_old).solve(gm.rhs(inj, p_ref))


def simulate_gas(gm: GasMesh, inj: np.ndarray, p_ref: np.ndarray, z0: np.ndarray | None = None) -> np.ndarray:
    """March the gas mesh over ``inj.shape[1]`` steps.

    ``inj`` holds net nodal injections (kg/s, positive into the network) and
    ``p_ref`` the reference pressures per step. Without ``z0`` the march
    starts from the steady state of the first step. Returns (n, steps).
    """
    inj = np.atleast_2d(np.asarray(inj, float))
    p_ref = np.atleast_2d(np.asarray(p_ref, float))
    steps = inj.shape[1]
    Z = np.empty((gm.n, steps))
    lu = _factor(gm.A_new)
    start = 0
    if z0 is None:
        if steps == 0:
            return Z
        Z[:, 0] = steady_gas(gm, inj[:, 0], p_ref[:, 0])
        z0, start = Z[:, 0], 1
    prev = np.asarray(z0, float)
    for t in range(start, steps):
        prev = lu.solve(gm.A_old @ prev + gm.rhs(inj[:, t], p_ref[:, t]))
        Z[:, t] = prev
    return Z


def steady_heat(hm: HeatMesh, inj: np.ndarray) -> np.ndarray:
    return _factor(hm.A_new - hm.A_old).solve(hm.rhs(inj))


def _sweep_step(hm: HeatMesh, prev: np.ndarray, inj: np.ndarray) -> np.ndarray:
    """One implicit step by sweeping pipes in flow order (tree or DAG networks)."""
    net = hm.net
    z = np.empty_like(prev)
    cp_m = np.array([p.specific_heat * p.mass_flow for p in net.pipes])
    for i in hm.order:
        arriving = np.flatnonzero(net.ends[:, 1] == i)
        outlets = z[hm.offsets[arriving] + hm.n_seg[arriving]]
        if hm.inj_gain[i] > 0:
            Ti = hm.inj_gain[i] * (inj[i] + cp_m[arriving] @ outlets)
        elif arriving.size:
            Ti = net.arrival_weights[i, arriving] @ outlets
        else:
            Ti = 0.0
        z[hm.n_mesh + i] = Ti
        for k in np.flatnonzero(net.ends[:, 0] == i):
            cols = hm.pipe_cols(k)
            z[cols] = kernels.upwind_sweep(prev[cols], Ti, hm.courant[k], hm.decay[k])
    return z


def simulate_heat(hm: HeatMesh, inj: np.ndarray, z0: np.ndarray | None = None, method: str = "auto") -> np.ndarray:
    """March the heat mesh; ``method`` is ``sweep``, ``direct`` or ``auto`` (sweep when acyclic)."""
    inj = np.atleast_2d(np.asarray(inj, float))
    steps = inj.shape[1]
    if method == "auto":
        method = "sweep" if hm.order is not None else "direct"
    if method == "sweep" and hm.order is None:
        raise NetworkError("sweep needs an acyclic flow graph")
    Z = np.empty((hm.n, steps))
    start = 0
    if z0 is None:
        if steps == 0:
            return Z
        Z[:, 0] = steady_heat(hm, inj[:, 0])
        z0, start = Z[:, 0], 1
    prev = np.asarray(z0, float)
    lu = _factor(hm.A_new) if method == "direct" else None
    for t in range(start, steps):
        if lu is None:
            prev = _sweep_step(hm, prev, inj[:, t])
        else:
            prev = lu.solve(hm.A_old @ prev + hm.rhs(inj[:, t]))
        Z[:, t] = prev
    return Z


def mesh_state(gm: GasMesh | None, hm: HeatMesh | None, Zg=None, Zh=None) -> MeshState:
    st = MeshState(z_gas=Zg, z_heat=Zh)
    if gm is not None and Zg is not None:
        st.gas_p = [Zg[gm.pressure_cols(k)] for k in range(len(gm.n_seg))]
        st.gas_m = [Zg[gm.flow_cols(k)] for k in range(len(gm.n_seg))]
        st.node_p = Zg[gm.n_mesh :]
    if hm is not None and Zh is not None:
        st.heat_T = [Zh[hm.pipe_cols(k)] for k in range(len(hm.n_seg))]
        st.node_T = Zh[hm.n_mesh :]
    return st


def historical_injections(prep) -> tuple:
    """Net nodal gas and heat injections over the historical interval."""
    from .oef import FREQ_SERIES

    n_h = prep.n_h
    gas = -prep.gas_load[:, :n_h].copy() if prep.gas is not None else None
    heat = -prep.heat_load[:, :n_h].copy() if prep.heat is not None else None
    for block, kind, net, sg in FREQ_SERIES:
        target, where = (gas, prep.gas_of) if net == "gas" else (heat, prep.heat_of)
        if target is None:
            continue
        for i, node in enumerate(where[kind]):
            target[node] += sg * prep.history[block][i]
    return gas, heat


def simulate_fdm(sc_or_prep, boundary: dict | None = None, mesh: MeshConfig | None = None) -> MeshState:
    """Forward simulation of the pipe networks.

    ``boundary`` may hold ``gas`` (n_gas, steps) and ``heat`` (n_heat, steps)
    nodal injections, ``p_ref`` (n_ref, steps) and initial states ``z_gas`` /
    ``z_heat``. By default the historical interval of the scenario is
    replayed from a flat steady state.
    """
    from .oef import Prepared, prepare

    prep = sc_or_prep if isinstance(sc_or_prep, Prepared) else prepare(sc_or_prep)
    mesh = mesh or MeshConfig.from_scenario(prep.sc)
    dt = mesh.dt or prep.sc.horizon.dt
    boundary = dict(boundary or {})
    if "gas" not in boundary and "heat" not in boundary:
        g, h = historical_injections(prep)
        boundary["gas"], boundary["heat"] = g, h
        if prep.gas is not None:
            boundary.setdefault("p_ref", prep.p_ref[:, : prep.n_h])
    gm = hm = Zg = Zh = None
    if prep.gas is not None and boundary.get("gas") is not None:
        gm = discretize_gas(prep.gas, mesh.dx_gas, dt)
        inj = np.asarray(boundary["gas"], float)
        p_ref = boundary.get("p_ref")
        if p_ref is None:
            p_ref = np.repeat(prep.p_ref[:, :1], inj.shape[1], axis=1)
        Zg = simulate_gas(gm, inj, p_ref, boundary.get("z_gas"))
    if prep.heat is not None and boundary.get("heat") is not None:
        hm = discretize_heat(prep.heat, mesh.dx_heat, dt)
        Zh = simulate_heat(hm, boundary["heat"], boundary.get("z_heat"))
    return mesh_state(gm, hm, Zg, Zh)


# ------------------------------------------------------------ dispatch model


@dataclass
class FdmBuilt:
    model: QpModel
    prep: object
    mesh: MeshConfig
    gas: GasMesh | None
    heat: HeatMesh | None
    time_vars: dict
    z_gas: np.ndarray | None  # (n_d, n) column indices
    z_heat: np.ndarray | None
    init_gas: np.ndarray | None
    init_heat: np.ndarray | None
    build_time: float


def initial_states(prep, gm: GasMesh | None, hm: HeatMesh | None):
    """Terminal mesh states of the replayed historical interval.

    Without history the steady state of the first dispatch step's loads is used.
    """
    g_inj, h_inj = historical_injections(prep)
    zg = zh = None
    if gm is not None:
        if prep.n_h:
            zg = simulate_gas(gm, g_inj, prep.p_ref[:, : prep.n_h])[:, -1]
        else:
            zg = steady_gas(gm, -prep.gas_load[:, prep.disp[0]], prep.p_ref[:, prep.disp[0]])
    if hm is not None:
        if prep.n_h:
            zh = simulate_heat(hm, h_inj)[:, -1]
        else:
            zh = steady_heat(hm, -prep.heat_load[:, prep.disp[0]])
    return zg, zh


def _march_rows(model: QpModel, z: np.ndarray, mesh, z0: np.ndarray, rhs: np.ndarray, dev_terms, label: str) -> None:
    """``A_new z_t - A_old z_{t-1} - sum dev = rhs_t`` for every dispatch step."""
    n_d, n = z.shape
    A_new, A_old = mesh.A_new.tocoo(), mesh.A_old.tocoo()
    rows, cols, vals = [], [], []
    for t in range(n_d):
        rows.append(A_new.row + t * n)
        cols.append(z[t][A_new.col])
        vals.append(A_new.data)
        if t:
            rows.append(A_old.row + t * n)
            cols.append(z[t - 1][A_old.col])
            vals.append(-A_old.data)
    b = rhs.copy()
    b[0] += mesh.A_old @ z0
    for row, dev_cols, coef in dev_terms:  # row within a step, (n_d,) columns, scalar coefficient
        rows.append(row + n * np.arange(n_d))
        cols.append(dev_cols)
        vals.append(np.full(n_d, -coef))
    model.add_rows(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), b.ravel(), b.ravel(), label)


def assemble_fdm_model(sc_or_prep, mesh: MeshConfig | None = None) -> FdmBuilt:
    """Time-domain dispatch model with every pipe meshed; objective is the operating cost only."""
    from .oef import (
        FREQ_SERIES,
        Prepared,
        add_balance_rows,
        add_coupling_rows,
        add_device_vars,
        add_epn_security,
        add_objective,
        add_ramp_rows,
        prepare,
    )

    t0 = time.perf_counter()
    prep = sc_or_prep if isinstance(sc_or_prep, Prepared) else prepare(sc_or_prep)
    sc = prep.sc
    mesh = mesh or MeshConfig.from_scenario(sc)
    if mesh.dt is not None and abs(mesh.dt - sc.horizon.dt) > 1e-9 * sc.horizon.dt:
        raise ModelError("the dispatch model steps at the scenario time step")
    dt = sc.horizon.dt
    model = QpModel(f"{sc.name}:fdm")
    tv = add_device_vars(model, prep)
    add_ramp_rows(model, prep, tv)
    add_coupling_rows(model, prep, tv)
    add_balance_rows(model, prep, tv)
    add_epn_security(model, prep, tv)

    gm = discretize_gas(prep.gas, mesh.dx_gas, dt) if prep.gas is not None else None
    hm = discretize_heat(prep.heat, mesh.dx_heat, dt) if prep.heat is not None else None
    zg0, zh0 = initial_states(prep, gm, hm)
    n_d = prep.n_d
    zg = zh = None

    if gm is not None:
        pscale = float(np.abs(prep.p_ref).max()) or 1.0
        mscale = max(float(np.abs(prep.gas_load).max(initial=0.0)), 1.0)
        scale = np.full(gm.n, pscale)
        for k in range(len(gm.n_seg)):
            scale[gm.flow_cols(k)] = mscale
        zg = model.add_vars("z_gas", (n_d, gm.n), scale=np.broadcast_to(scale, (n_d, gm.n)))
        rhs = np.stack([gm.rhs(-prep.gas_load[:, t], prep.p_ref[:, t]) for t in prep.disp])
        terms = []
        for block, kind, net, sg in FREQ_SERIES:
            if net != "gas":
                continue
            for i, node in enumerate(prep.gas_of[kind]):
                if node in set(prep.ref.tolist()):
                    continue  # the reference balance is not formed
                terms.append((gm.node_row[node], tv[block][i], sg))
        _march_rows(model, zg, gm, zg0, rhs, terms, "ngn-circuit")
        lb, ub = prep.p_bounds()
        free = prep.free
        cols = zg[:, gm.node_col(free)].T  # (n_free, n_d)
        model.add_rows(np.arange(cols.size), cols.ravel(), np.ones(cols.size), np.repeat(lb[free], n_d), np.repeat(ub[free], n_d), "ngn-security")

    if hm is not None:
        lb_t, ub_t = prep.t_bounds()
        fin = np.abs(np.concatenate([lb_t[np.isfinite(lb_t)], ub_t[np.isfinite(ub_t)]]))
        tscale = float(fin.max()) if fin.size and fin.max() > 0 else 10.0
        zh = model.add_vars("z_heat", (n_d, hm.n), scale=tscale)
        rhs = np.stack([hm.rhs(-prep.heat_load[:, t]) for t in prep.disp])
        terms = []
        for block, kind, net, sg in FREQ_SERIES:
            if net != "heat":
                continue
            for i, node in enumerate(prep.heat_of[kind]):
                if hm.inj_gain[node] > 0:
                    terms.append((hm.node_row[node], tv[block][i], sg * hm.inj_gain[node]))
        _march_rows(model, zh, hm, zh0, rhs, terms, "dhn-circuit")
        cols = zh[:, hm.node_col(np.arange(prep.n_heat))].T
        model.add_rows(np.arange(cols.size), cols.ravel(), np.ones(cols.size), np.repeat(lb_t, n_d), np.repeat(ub_t, n_d), "dhn-security")

    add_objective(model, prep, tv, None, None)
    model.compile()
    return FdmBuilt(model, prep, mesh, gm, hm, tv, zg, zh, zg0, zh0, time.perf_counter() - t0)


def solve_fdm(sc_or_prep, mesh: MeshConfig | None = None, tol: float | None = None):
    """Assemble and solve the finite-difference dispatch model. Returns ``(DispatchSolution, FdmBuilt)``."""
    from .flowcalc import MonitoredState, power_injections
    from .oef import DispatchSolution, w1_value

    t0 = time.perf_counter()
    built = assemble_fdm_model(sc_or_prep, mesh)
    prep = built.prep
    t_model = time.perf_counter() - t0
    res = solve(built.model, tol=tol or prep.sc.solver.tol)
    timing = {"modeling": t_model, "optimizing": res.solve_time, "security": 0.0}
    if not res.ok:
        timing["total"] = time.perf_counter() - t0
        return DispatchSolution("fdm", res.status, None, None, None, {}, {}, None, timing, stats(built.model), info=dict(res.info)), built
    t1 = time.perf_counter()
    m = built.model
    schedules = {b: m.value(res.x, b) for b in built.time_vars}
    x = res.x
    p = x[built.z_gas[:, built.gas.n_mesh :]].T if built.gas is not None else np.zeros((0, prep.n_d))
    T = x[built.z_heat[:, built.heat.n_mesh :]].T if built.heat is not None else np.zeros((0, prep.n_d))
    monitored = MonitoredState(prep.ptdf @ power_injections(prep, schedules), p, T)
    w1 = w1_value(prep, schedules)
    timing["security"] = time.perf_counter() - t1
    timing["total"] = time.perf_counter() - t0
    sol = DispatchSolution("fdm", res.status, float(res.objective), w1, 0.0, schedules, {}, monitored, timing, stats(m), 0.0, dict(res.info))
    return sol, built


def _rms(x, axis=-1):
    return np.sqrt(np.mean(np.square(x), axis=axis))


def _discrepancy(fdm_nodes, ecm_nodes) -> dict:
    err = _rms(fdm_nodes - ecm_nodes)
    size = np.maximum(_rms(ecm_nodes), 1e-300)
    swing = np.ptp(ecm_nodes, axis=-1)
    return {
        "fdm": fdm_nodes,
        "ecm": ecm_nodes,
        "rel_rms": err / size,
        # nodes held (nearly) constant have no swing to compare against: nan
        "swing_rms": np.where(swing > 1e-6 * size, err / np.maximum(swing, 1e-300), np.nan),
    }


def forward_comparison(gas=None, gas_inj=None, p_ref=None, heat=None, heat_inj=None, dt: float = 900.0,
                       dx_gas: float = 200.0, dx_heat: float = 100.0, warmup: int = 1) -> dict:
    """Replay one period of boundary samples through both the mesh and the periodic circuit solution.

    The mesh starts from the steady state of the first sample, runs
    ``warmup`` full periods, and the following period is compared node by
    node. Returned per network: ``fdm`` and ``ecm`` node series, ``rel_rms``
    (RMS difference over RMS of the circuit solution, per node) and
    ``swing_rms`` (RMS difference over the peak-to-peak swing, nan for
    nodes without a swing).
    """
    from .flowcalc import periodic_response

    if warmup < 1:
        raise ValueError("at least one warm-up period is required")
    p_ecm, T_ecm = periodic_response(gas, gas_inj, p_ref, heat, heat_inj, dt)
    out = {}
    reps = warmup + 1
    if gas is not None:
        gm = discretize_gas(gas, dx_gas, dt)
        inj = np.tile(np.atleast_2d(gas_inj), reps)
        pr = np.tile(np.atleast_2d(p_ref), reps)
        n = inj.shape[1] // reps
        Z = simulate_gas(gm, inj, pr)[gm.n_mesh :, -n:]
        out["gas"] = _discrepancy(Z, p_ecm)
    if heat is not None:
        hm = discretize_heat(heat, dx_heat, dt)
        inj = np.tile(np.atleast_2d(heat_inj), reps)
        n = inj.shape[1] // reps
        Z = simulate_heat(hm, inj)[hm.n_mesh :, -n:]
        out["heat"] = _discrepancy(Z, T_ecm)
    return out
