"""Incidence matrices and frequency-dependent network matrices.

Sign conventions: branch ``j`` runs from ``ends[j][0]`` to ``ends[j][1]``;
node injections are positive into the network, so ``A @ branch_flow`` is the
injection vector.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .circuits import GasPipe, HeatPipe, gas_line, gas_lumped, gas_two_port, heat_transmission_factors


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Incidence:
    A: np.ndarray
    A_plus: np.ndarray
    A_minus: np.ndarray
    A_tilde: np.ndarray | None = None  # flow-weighted outflow incidence (DHN only)

    @property
    def has_outflow(self) -> np.ndarray:
        return self.A_plus.sum(axis=1) > 0


def _check_ends(n_nodes, ends):
    ends = np.asarray(ends, dtype=np.int64).reshape(-1, 2)
    if ends.size and (ends.min() < 0 or ends.max() >= n_nodes):
        raise NetworkError("branch refers to a node outside the network")
    if np.any(ends[:, 0] == ends[:, 1]):
        raise NetworkError("self-loop branch")
    return ends


def is_connected(n_nodes: int, ends) -> bool:
    if n_nodes <= 1:
        return True
    ends = np.asarray(ends, dtype=np.int64).reshape(-1, 2)
    g = coo_matrix((np.ones(len(ends)), (ends[:, 0], ends[:, 1])), shape=(n_nodes, n_nodes))
    n_comp, _ = connected_components(g, directed=False)
    return n_comp == 1


def build_incidence(n_nodes: int, ends, flows=None) -> Incidence:
    """Node-branch incidence matrices; ``flows`` (per branch) adds the weighted outflow matrix."""
    ends = _check_ends(n_nodes, ends)
    nb = len(ends)
    cols = np.arange(nb)
    A_plus = np.zeros((n_nodes, nb))
    A_minus = np.zeros((n_nodes, nb))
    A_plus[ends[:, 0], cols] = 1.0
    A_minus[ends[:, 1], cols] = 1.0
    A_tilde = None
    if flows is not None:
        flows = np.asarray(flows, dtype=float)
        if flows.shape != (nb,):
            raise NetworkError(f"expected {nb} branch flows, got shape {flows.shape}")
        passing = A_plus @ flows
        out = A_plus.sum(axis=1) > 0
        if np.any(passing[out] <= 0):
            bad = np.flatnonzero(out & (passing <= 0))
            raise NetworkError(f"zero total passing water flow at node(s) {bad.tolist()}")
        scale = np.zeros(n_nodes)
        scale[out] = 1.0 / passing[out]
        A_tilde = scale[:, None] * A_plus * flows[None, :]
    return Incidence(A_plus - A_minus, A_plus, A_minus, A_tilde)


# --------------------------------------------------------------------------- gas


@dataclass
class GasNetwork:
    """Pipes between numbered nodes, plus the pressure-reference node(s)."""

    n_nodes: int
    ends: np.ndarray
    pipes: list[GasPipe]
    reference: list[int]
    _line_cache: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.ends = _check_ends(self.n_nodes, self.ends)
        if len(self.pipes) != len(self.ends):
            raise NetworkError("one geometry per gas pipe required")
        if not self.reference:
            raise NetworkError("gas network needs a reference node")
        if any(r < 0 or r >= self.n_nodes for r in self.reference):
            raise NetworkError("reference node outside the network")
        self._line_cache = [gas_line(p) for p in self.pipes]

    @property
    def lines(self):
        return self._line_cache

    @property
    def free_nodes(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_nodes), self.reference)

    def expanded_branches(self, omega: float):
        """Series and shunt branches of the pi-equivalents: (ends, Y, K) with ground = -1."""
        ends, ys, ks = [], [], []
        for (i, j), line, pipe in zip(self.ends, self.lines, self.pipes):
            pi = gas_lumped(gas_two_port(line, omega, pipe.length))
            ends += [(i, j), (i, -1), (j, -1)]
            ys += [1.0 / pi.Z, pi.Y1, pi.Y2]
            ks += [pi.K, 0.0, 0.0]
        return np.asarray(ends, dtype=np.int64).reshape(-1, 2), np.asarray(ys, complex), np.asarray(ks, complex)

    def admittance(self, omega: float) -> np.ndarray:
        return gas_node_admittance(self, omega)


def gas_node_admittance(net: GasNetwork, omega: float) -> np.ndarray:
    """Generalised node admittance ``A Yb A^T - A Yb Kb A+^T`` over the expanded branch set.

    Ground (index -1) is the implicit datum: its row is simply not formed.
    """
    ends, yb, kb = net.expanded_branches(omega)
    n, nb = net.n_nodes, len(ends)
    A = np.zeros((n, nb), dtype=complex)
    Ap = np.zeros((n, nb), dtype=complex)
    cols = np.arange(nb)
    frm, to = ends[:, 0], ends[:, 1]
    A[frm, cols] += 1.0
    grounded = to < 0
    A[to[~grounded], cols[~grounded]] -= 1.0
    Ap[frm, cols] = 1.0
    return (A * yb) @ A.T - (A * (yb * kb)) @ Ap.T


@dataclass(frozen=True)
class Impedance:
    """Inverse of a reduced admittance, embedded back at full size (reference rows/cols zero)."""

    Z: np.ndarray
    reference: tuple


def gas_node_impedance(Y: np.ndarray, reference) -> Impedance:
    reference = tuple(sorted({int(r) for r in np.atleast_1d(reference)}))
    n = Y.shape[0]
    keep = np.setdiff1d(np.arange(n), reference)
    Yr = Y[np.ix_(keep, keep)]
    try:
        with warnings.catch_warnings():
            # singularity is reported below as a NetworkError
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(Yr, check_finite=True)
        Zr = scipy.linalg.lu_solve(lu, np.eye(len(keep), dtype=Yr.dtype))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NetworkError(f"reduced gas admittance is singular: {exc}") from exc
    if not np.all(np.isfinite(Zr)) or np.linalg.cond(Yr) > 1e14:
        raise NetworkError("reduced gas admittance is singular (disconnected sub-network without reference?)")
    Z = np.zeros_like(Y)
    Z[np.ix_(keep, keep)] = Zr
    return Impedance(Z, reference)


# -------------------------------------------------------------------------- heat


@dataclass
class HeatNetwork:
    """Supply-side district heating network with fixed branch water flows."""

    n_nodes: int
    ends: np.ndarray
    pipes: list[HeatPipe]

    def __post_init__(self):
        self.ends = _check_ends(self.n_nodes, self.ends)
        if len(self.pipes) != len(self.ends):
            raise NetworkError("one geometry per heat pipe required")
        self.incidence = build_incidence(self.n_nodes, self.ends, [p.mass_flow for p in self.pipes])
        isolated = (self.incidence.A_plus.sum(axis=1) + self.incidence.A_minus.sum(axis=1)) == 0
        if self.n_nodes > 1 and np.any(isolated):
            raise NetworkError(f"isolated heat node(s) {np.flatnonzero(isolated).tolist()}")
        self.cp_m = np.array([p.specific_heat * p.mass_flow for p in self.pipes])
        flows = np.array([p.mass_flow for p in self.pipes])
        inflow = self.incidence.A_minus @ flows
        self.terminal = (~self.incidence.has_outflow) & (inflow > 0)
        # arrival-mixing weights for nodes without an outflow branch
        w = np.zeros_like(self.incidence.A_minus)
        t = self.terminal
        w[t] = self.incidence.A_minus[t] * flows[None, :] / inflow[t, None]
        self.arrival_weights = w

    def factors(self, omegas) -> np.ndarray:
        """Heat transmission factors, shape (len(omegas), n_branches)."""
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        return np.stack([heat_transmission_factors(p, omegas) for p in self.pipes], axis=1)

    def branch_admittance(self, phi) -> np.ndarray:
        return heat_branch_admittance(self.incidence, phi, self.cp_m)

    def monitor_map(self, phi) -> np.ndarray:
        """Node temperatures from branch-head temperatures at one frequency.

        Nodes with outflow take the flow-weighted head temperature of their
        outflow branches; terminal nodes take the flow-weighted arrival
        temperature of their inflow branches.
        """
        return self.incidence.A_tilde + self.arrival_weights * np.asarray(phi)[None, :]


def heat_branch_admittance(inc: Incidence, phi, cp_m) -> np.ndarray:
    """``(I - A~+^T A- Phi) diag(c_p m)``."""
    phi = np.asarray(phi, dtype=complex)
    nb = inc.A.shape[1]
    return (np.eye(nb) - inc.A_tilde.T @ (inc.A_minus * phi[None, :])) * np.asarray(cp_m)[None, :]


def heat_node_impedance(Y_hb: np.ndarray, A_tilde: np.ndarray, monitor=None) -> np.ndarray:
    """``M Y_hb^-1 A~+^T`` with ``M = A~+`` unless a monitor map is given."""
    M = A_tilde if monitor is None else monitor
    try:
        X = scipy.linalg.solve(Y_hb, A_tilde.T.astype(complex))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NetworkError(f"singular heat branch admittance: {exc}") from exc
    return M @ X


# ---------------------------------------------------------------------- electric


def compute_ptdf(n_bus: int, ends, reactance, slack: int) -> np.ndarray:
    """DC power transfer distribution factors (line x bus); the slack column is zero."""
    ends = _check_ends(n_bus, ends)
    x = np.asarray(reactance, dtype=float)
    if np.any(x <= 0):
        raise NetworkError("line reactances must be positive")
    if not is_connected(n_bus, ends):
        raise NetworkError("electric network is not connected")
    inc = build_incidence(n_bus, ends).A
    Bl = inc.T / x[:, None]  # line flow per unit angle
    Bbus = inc @ Bl
    keep = np.setdiff1d(np.arange(n_bus), [slack])
    ptdf = np.zeros((len(ends), n_bus))
    if keep.size:
        ptdf[:, keep] = Bl[:, keep] @ np.linalg.inv(Bbus[np.ix_(keep, keep)])
    return ptdf
