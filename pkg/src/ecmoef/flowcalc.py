"""Energy flow calculation from nodal injections, and the security check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VIOLATION_TYPES = ("epn-lb", "epn-ub", "ngn-lb", "ngn-ub", "dhn-lb", "dhn-ub")


@dataclass
class MonitoredState:
    line_flow: np.ndarray  # (n_line, n_d) W
    pressure: np.ndarray  # (n_gas, n_d) Pa, absolute
    temperature: np.ndarray  # (n_heat, n_d) K above ambient

    def __post_init__(self):
        for name in ("line_flow", "pressure", "temperature"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite {name} in monitored state")


@dataclass(frozen=True)
class ViolationRecord:
    kind: str  # one of VIOLATION_TYPES
    index: int  # line or node index
    tau: int  # dispatch step (0-based within the dispatch interval)
    magnitude: float  # physical units
    iteration: int = 0


def power_injections(prep, schedules: dict) -> np.ndarray:
    """Net bus injections over the dispatch steps, (n_bus, n_d)."""
    from .oef import POWER_SIGN

    P = -prep.power_load.copy()
    for kind, (block, sg) in POWER_SIGN.items():
        for i, bus in enumerate(prep.bus_of[kind]):
            P[bus] += sg * schedules[block][i]
    return P


def node_phasors(prep, phasors: dict, net: str) -> np.ndarray:
    """Net nodal injection phasors of one pipe network, (n_nodes, n_f)."""
    from .oef import FREQ_SERIES

    if net == "gas":
        out = -prep.gas_load_f.copy()
        where = prep.gas_of
    else:
        out = -prep.heat_load_f.copy()
        where = prep.heat_of
    for block, kind, nt, sg in FREQ_SERIES:
        if nt != net:
            continue
        for i, node in enumerate(where[kind]):
            out[node] += sg * phasors[block][i]
    return out


def evaluate_monitored(prep, P_n: np.ndarray, m_n: np.ndarray | None, h_n: np.ndarray | None) -> MonitoredState:
    """Line flows from bus injections; pressures and temperatures from injection phasors."""
    n_d = prep.n_d
    if P_n.shape != (len(prep.sc.epn.buses), n_d):
        raise ValueError(f"bus injections must have shape {(len(prep.sc.epn.buses), n_d)}, got {P_n.shape}")
    flows = prep.ptdf @ P_n
    W = prep.W
    if prep.gas is not None:
        if m_n is None or m_n.shape != (prep.n_gas, prep.n_f):
            raise ValueError("gas injection phasors have the wrong shape")
        pf = np.einsum("kij,jk->ik", prep.Zg, m_n) + np.einsum("kir,rk->ik", prep.Hg, prep.p_ref_f)
        p = (pf @ W.T).real
        p[prep.ref] = prep.reference_pressure()
    else:
        p = np.zeros((0, n_d))
    if prep.heat is not None:
        if h_n is None or h_n.shape != (prep.n_heat, prep.n_f):
            raise ValueError("heat injection phasors have the wrong shape")
        T = (np.einsum("kij,jk->ik", prep.Zh, h_n) @ W.T).real
    else:
        T = np.zeros((0, n_d))
    return MonitoredState(flows, p, T)


def evaluate_solution(prep, schedules: dict, phasors: dict) -> MonitoredState:
    m_n = node_phasors(prep, phasors, "gas") if prep.gas is not None else None
    h_n = node_phasors(prep, phasors, "heat") if prep.heat is not None else None
    return evaluate_monitored(prep, power_injections(prep, schedules), m_n, h_n)


def _tolerance(bound: np.ndarray, rel: float, abs_: float) -> np.ndarray:
    return np.maximum(rel * np.abs(bound), abs_)


def _side(values, lb, ub, kind, rel, abs_, iteration, out):
    lb = np.broadcast_to(np.asarray(lb, float)[:, None], values.shape)
    ub = np.broadcast_to(np.asarray(ub, float)[:, None], values.shape)
    with np.errstate(invalid="ignore"):
        lo = lb - values
        hi = values - ub
    for name, excess, bound in ((f"{kind}-lb", lo, lb), (f"{kind}-ub", hi, ub)):
        fin = np.isfinite(bound)
        bad = fin & (excess > _tolerance(np.where(fin, bound, 0.0), rel, abs_))
        recs = [ViolationRecord(name, int(i), int(t), float(excess[i, t]), iteration) for i, t in zip(*np.nonzero(bad))]
        # most severe first; ties broken by lowest index
        recs.sort(key=lambda r: (-r.magnitude, r.index, r.tau))
        out[name] = recs


def security_check(prep, state: MonitoredState, rel: float = 1e-6, abs_: float = 1e-6, iteration: int = 0) -> dict:
    """Six violation sets keyed by :data:`VIOLATION_TYPES`."""
    out = {}
    lim = prep.line_limit
    _side(state.line_flow, -lim, lim, "epn", rel, abs_, iteration, out)
    if prep.gas is not None:
        lb, ub = prep.p_bounds()
    else:
        lb = ub = np.zeros(0)
    _side(state.pressure, lb, ub, "ngn", rel, abs_, iteration, out)
    if prep.heat is not None:
        lb, ub = prep.t_bounds()
    else:
        lb = ub = np.zeros(0)
    _side(state.temperature, lb, ub, "dhn", rel, abs_, iteration, out)
    return out


def is_secure(violations: dict) -> bool:
    return all(len(v) == 0 for v in violations.values())


def periodic_response(gas=None, gas_inj=None, p_ref=None, heat=None, heat_inj=None, dt: float = 900.0):
    """Steady periodic node pressures / temperatures for one period of boundary samples.

    ``gas`` is a :class:`ecmoef.network.GasNetwork` with nodal injections
    ``gas_inj`` (n_nodes, n) and reference pressures ``p_ref`` (n_ref, n);
    ``heat`` a :class:`ecmoef.network.HeatNetwork` with ``heat_inj``.
    Returns ``(p, T)``; entries for absent networks are ``None``.
    """
    from .network import gas_node_impedance, heat_node_impedance
    from .spectral import Horizon, forward_dft, inverse_dft

    p = T = None
    if gas is not None:
        gas_inj = np.atleast_2d(np.asarray(gas_inj, float))
        n = gas_inj.shape[1]
        omega = Horizon(0, n, dt).omega
        ref = np.asarray(gas.reference)
        pr = np.atleast_2d(np.asarray(p_ref, float))
        mf, pf = forward_dft(gas_inj), forward_dft(pr)
        out = np.zeros((gas.n_nodes, len(omega)), complex)
        free = gas.free_nodes
        for k, w in enumerate(omega):
            Y = gas.admittance(w)
            Z = gas_node_impedance(Y, ref).Z
            out[:, k] = Z @ mf[:, k] - Z[:, free] @ (Y[np.ix_(free, ref)] @ pf[:, k])
            out[ref, k] = pf[:, k]
        p = inverse_dft(out, n)
    if heat is not None:
        heat_inj = np.atleast_2d(np.asarray(heat_inj, float))
        n = heat_inj.shape[1]
        omega = Horizon(0, n, dt).omega
        phi = heat.factors(omega)
        hf = forward_dft(heat_inj)
        out = np.zeros((heat.n_nodes, len(omega)), complex)
        At = heat.incidence.A_tilde
        for k in range(len(omega)):
            Zh = heat_node_impedance(heat.branch_admittance(phi[k]), At, heat.monitor_map(phi[k]))
            out[:, k] = Zh @ hf[:, k]
        T = inverse_dft(out, n)
    return p, T


def balance_audit(prep, schedules: dict) -> dict:
    """Relative balance residuals of a dispatch.

    ``power``: per step, (supply - demand) / max(demand, 1 W);
    ``gas``: horizon (injection - load) / load; ``heat``: horizon
    (supply - load) / load, which may be positive (surplus is allowed).
    """
    from .oef import FREQ_SERIES

    P = power_injections(prep, schedules).sum(axis=0)
    demand = prep.power_load.sum(axis=0)
    out = {"power": P / np.maximum(np.abs(demand), 1.0), "gas": 0.0, "heat": 0.0}
    for net, load in (("gas", prep.gas_load), ("heat", prep.heat_load)):
        if load is None:
            continue
        total = float(load[:, prep.disp].sum())
        supply = sum(sg * float(schedules[b].sum()) for b, _, nt, sg in FREQ_SERIES if nt == net and schedules[b].size)
        out[net] = (supply - total) / max(abs(total), 1e-12)
    return out
