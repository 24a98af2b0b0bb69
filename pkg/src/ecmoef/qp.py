"""Solver-agnostic convex QP container, statistics and the solve adapter.

Model form::

    min  sum_j c_j x_j^2 + q.x + const
    s.t. lo <= A x <= hi        (equality rows have lo == hi)
         lb <= x <= ub

The Hessian is diagonal, which is all the dispatch objectives need. Rows that
touch a single variable are folded into the bounds on insertion and only
tallied per label, so ``stats`` counts the same way a commercial presolve
report would.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LABELS = (
    "ramping",
    "coupling",
    "freedom",
    "balance",
    "epn-security",
    "ngn-security",
    "dhn-security",
    "ngn-circuit",
    "dhn-circuit",
    "tf-conversion",
    "historical-boundary",
)

STATUSES = ("optimal", "infeasible", "unbounded", "numerical-trouble", "iteration-limit")


class ModelError(ValueError):
    pass


@dataclass
class ModelStats:
    variables: int
    constraints: int
    nonzeros: int
    density: float
    rows_by_label: dict
    bounds_by_label: dict

    def as_dict(self) -> dict:
        return {
            "variables": self.variables,
            "constraints": self.constraints,
            "nonzeros": self.nonzeros,
            "density": self.density,
            "rows_by_label": dict(self.rows_by_label),
            "bounds_by_label": dict(self.bounds_by_label),
        }


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    solve_time: float
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class QpModel:
    def __init__(self, name: str = "model"):
        self.name = name
        self.blocks: dict[str, np.ndarray] = {}
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._scale: list[np.ndarray] = []
        self.n = 0
        self._chunks: list[tuple] = []  # (rows, cols, vals) with global row ids
        self._lo: list[np.ndarray] = []
        self._hi: list[np.ndarray] = []
        self._labels: list[np.ndarray] = []
        self.m = 0
        self._quad: dict[int, float] = {}
        self._lin: list[tuple] = []
        self.const = 0.0
        self.bound_rows: Counter = Counter()
        self._compiled = None
        self._bounds_cache = None

    # ------------------------------------------------------------------ vars
    def add_vars(self, name: str, shape, lb=-np.inf, ub=np.inf, scale=1.0) -> np.ndarray:
        if name in self.blocks:
            raise ModelError(f"duplicate variable block {name!r}")
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        k = int(np.prod(shape))
        idx = np.arange(self.n, self.n + k).reshape(shape)
        lb = np.broadcast_to(np.asarray(lb, float), shape).ravel().copy()
        ub = np.broadcast_to(np.asarray(ub, float), shape).ravel().copy()
        if np.any(lb > ub):
            raise ModelError(f"block {name!r} has lb > ub")
        sc = np.broadcast_to(np.asarray(scale, float), shape).ravel().copy()
        if np.any(sc <= 0):
            raise ModelError("variable scales must be positive")
        self._lb.append(lb)
        self._ub.append(ub)
        self._scale.append(sc)
        self.blocks[name] = idx
        self.n += k
        self._bounds_cache = None
        self._compiled = None
        return idx

    def _bounds(self):
        if self._bounds_cache is None:
            self._bounds_cache = (
                np.concatenate(self._lb) if self._lb else np.zeros(0),
                np.concatenate(self._ub) if self._ub else np.zeros(0),
                np.concatenate(self._scale) if self._scale else np.zeros(0),
            )
            self._lb, self._ub, self._scale = [self._bounds_cache[0]], [self._bounds_cache[1]], [self._bounds_cache[2]]
        return self._bounds_cache

    @property
    def lb(self) -> np.ndarray:
        return self._bounds()[0]

    @property
    def ub(self) -> np.ndarray:
        return self._bounds()[1]

    @property
    def scale(self) -> np.ndarray:
        return self._bounds()[2]

    def tighten(self, cols, lb=None, ub=None):
        lo, hi, _ = self._bounds()
        cols = np.asarray(cols)
        if lb is not None:
            lo[cols] = np.maximum(lo[cols], lb)
        if ub is not None:
            hi[cols] = np.minimum(hi[cols], ub)
        self._compiled = None

    # ------------------------------------------------------------------ rows
    def add_rows(self, rows, cols, vals, lo, hi, label: str) -> int:
        """Add ``lo <= sum vals * x[cols] <= hi``; ``rows`` index into ``lo``/``hi``.

        Returns the number of matrix rows actually added (single-variable rows
        become bounds, empty rows are checked and dropped).
        """
        if label not in LABELS:
            raise ModelError(f"unknown provenance label {label!r}")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        k = max(lo.size, hi.size, int(rows.max()) + 1 if rows.size else 0)
        if lo.size not in (1, k) or hi.size not in (1, k):
            raise ModelError(f"{label}: bounds do not match the row count")
        lo = np.broadcast_to(lo, (k,)).copy()
        hi = np.broadcast_to(hi, (k,)).copy()
        if np.any(lo > hi):
            raise ModelError(f"{label}: row with lo > hi")
        mat = sp.coo_matrix(
            (np.asarray(vals, float).ravel(), (rows, np.asarray(cols).ravel())), shape=(k, self.n)
        ).tocsr()
        mat.sum_duplicates()
        mat.eliminate_zeros()
        counts = np.diff(mat.indptr)
        vacuous = np.isneginf(lo) & np.isposinf(hi)
        empty = counts == 0
        if np.any(empty & ~vacuous & ((lo > 1e-12 * np.maximum(1, np.abs(lo))) | (hi < -1e-12 * np.maximum(1, np.abs(hi))))):
            raise ModelError(f"{label}: constant row violates its bounds")
        single = (counts == 1) & ~vacuous
        if np.any(single):
            r = np.flatnonzero(single)
            c = mat.indices[mat.indptr[r]]
            a = mat.data[mat.indptr[r]]
            blo = np.where(a > 0, lo[r] / a, hi[r] / a)
            bhi = np.where(a > 0, hi[r] / a, lo[r] / a)
            lbv, ubv, _ = self._bounds()
            np.maximum.at(lbv, c, blo)
            np.minimum.at(ubv, c, bhi)
            # exact fixes from equality rows: avoid 1-ulp crossings
            fix = lo[r] == hi[r]
            lbv[c[fix]] = blo[fix]
            ubv[c[fix]] = blo[fix]
            self.bound_rows[label] += int(single.sum())
        keep = np.flatnonzero((counts >= 2) & ~vacuous)
        if keep.size:
            sub = mat[keep].tocoo()
            self._chunks.append((sub.row + self.m, sub.col, sub.data))
            self._lo.append(lo[keep])
            self._hi.append(hi[keep])
            self._labels.append(np.full(keep.size, LABELS.index(label), dtype=np.int8))
            self.m += keep.size
        self._compiled = None
        return int(keep.size)

    def add_dense_rows(self, cols, coef: np.ndarray, lo, hi, label: str) -> int:
        """Rows sharing one column set: ``coef`` has shape (k, len(cols))."""
        coef = np.asarray(coef, float)
        k, w = coef.shape
        rows = np.repeat(np.arange(k), w)
        lo = np.broadcast_to(np.asarray(lo, float), (k,))
        hi = np.broadcast_to(np.asarray(hi, float), (k,))
        return self.add_rows(rows, np.tile(np.asarray(cols).ravel(), k), coef.ravel(), lo, hi, label)

    def add_eq(self, rows, cols, vals, rhs, label: str) -> int:
        return self.add_rows(rows, cols, vals, rhs, rhs, label)

    # ------------------------------------------------------------- objective
    def add_objective(self, cols=None, linear=None, quad=None, const: float = 0.0):
        """Add ``sum quad_j x_j^2 + linear_j x_j`` over ``cols`` plus a constant."""
        if cols is not None:
            cols = np.asarray(cols).ravel()
            if quad is not None:
                quad = np.asarray(quad, float)
                quad = quad.ravel() if quad.size == cols.size else np.broadcast_to(quad, cols.shape)
                if np.any(quad < 0):
                    raise ModelError("negative quadratic cost makes the objective non-convex")
                for c, v in zip(cols.tolist(), quad.tolist()):
                    if v:
                        self._quad[c] = self._quad.get(c, 0.0) + v
            if linear is not None:
                linear = np.asarray(linear, float)
                linear = linear.ravel() if linear.size == cols.size else np.broadcast_to(linear, cols.shape)
                self._lin.append((cols, linear.copy()))
        self.const += float(const)
        self._compiled = None

    # --------------------------------------------------------------- compile
    def compile(self):
        """Return (A csr, lo, hi, label ids, quad diag, q)."""
        if self._compiled is None:
            if self._chunks:
                r = np.concatenate([c[0] for c in self._chunks])
                c = np.concatenate([c[1] for c in self._chunks])
                v = np.concatenate([c[2] for c in self._chunks])
                A = sp.csr_matrix((v, (r, c)), shape=(self.m, self.n))
                self._chunks = [(r, c, v)]
                lo, hi, lab = np.concatenate(self._lo), np.concatenate(self._hi), np.concatenate(self._labels)
                self._lo, self._hi, self._labels = [lo], [hi], [lab]
            else:
                A = sp.csr_matrix((0, self.n))
                lo = hi = np.zeros(0)
                lab = np.zeros(0, dtype=np.int8)
            quad = np.zeros(self.n)
            for j, v in self._quad.items():
                quad[j] += v
            q = np.zeros(self.n)
            for cols, vals in self._lin:
                np.add.at(q, cols, vals)
            self._compiled = (A, lo, hi, lab, quad, q)
        return self._compiled

    def objective_value(self, x) -> float:
        _, _, _, _, quad, q = self.compile()
        return float(quad @ (x * x) + q @ x + self.const)

    def row_labels(self) -> list[str]:
        return [LABELS[i] for i in self.compile()[3]]

    def unreferenced(self) -> np.ndarray:
        A, *_, quad, q = self.compile()
        used = np.zeros(self.n, bool)
        used[A.indices] = True
        used |= (quad != 0) | (q != 0)
        return np.flatnonzero(~used)

    def value(self, x, name: str) -> np.ndarray:
        return np.asarray(x)[self.blocks[name]]


def stats(model: QpModel) -> ModelStats:
    A, _, _, lab, _, _ = model.compile()
    nnz = int(A.nnz)
    cells = model.n * model.m
    counts = Counter(LABELS[i] for i in lab)
    return ModelStats(
        variables=model.n,
        constraints=model.m,
        nonzeros=nnz,
        density=nnz / cells if cells else 0.0,
        rows_by_label={k: counts.get(k, 0) for k in LABELS if counts.get(k, 0)},
        bounds_by_label={k: model.bound_rows[k] for k in LABELS if model.bound_rows.get(k, 0)},
    )


# ------------------------------------------------------------------- audit


@dataclass
class Audit:
    max_row: float  # worst scaled row violation
    max_bound: float
    by_label: dict

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_row <= tol and self.max_bound <= tol


def audit(model: QpModel, x) -> Audit:
    """Recompute every row and bound from the raw model.

    Row violations are scaled by the magnitude of the terms in the row
    (``sum |a_j| max(|x_j|, s_j) + |rhs|`` with ``s`` the variable scales) so
    that SI-unit rows of very different sizes are judged on the same
    relative footing, and rows that happen to sit at zero are judged against
    their typical size.
    """
    A, lo, hi, lab, _, _ = model.compile()
    x = np.asarray(x, float)
    v = A @ x
    mag = abs(A) @ np.maximum(np.abs(x), model.scale)
    rhs = np.maximum(np.where(np.isfinite(lo), np.abs(lo), 0), np.where(np.isfinite(hi), np.abs(hi), 0))
    denom = np.maximum(mag + rhs, 1e-9)
    viol = np.maximum(np.maximum(lo - v, v - hi), 0) / denom
    by_label = {}
    for i, name in enumerate(LABELS):
        sel = lab == i
        if np.any(sel):
            by_label[name] = float(viol[sel].max())
    bviol = np.maximum(np.maximum(model.lb - x, x - model.ub), 0)
    bden = np.maximum(1.0, np.maximum(np.where(np.isfinite(model.lb), np.abs(model.lb), 0), np.where(np.isfinite(model.ub), np.abs(model.ub), 0)))
    return Audit(
        max_row=float(viol.max()) if viol.size else 0.0,
        max_bound=float((bviol / bden).max()) if bviol.size else 0.0,
        by_label=by_label,
    )


# ------------------------------------------------------------------- solve


def _clarabel_solve(P, q, A, b, n_zero, n_nonneg, tol, max_iter, time_limit, reg=None):
    import clarabel

    s = clarabel.DefaultSettings()
    s.verbose = bool(__import__("os").environ.get("ECMOEF_VERBOSE"))
    s.tol_feas = tol
    s.tol_gap_abs = tol
    s.tol_gap_rel = tol
    s.max_iter = max_iter
    if time_limit:
        s.time_limit = time_limit
    if reg is not None:
        s.static_regularization_constant = reg
    if _THREADS is not None and hasattr(s, "max_threads"):
        s.max_threads = _THREADS
    try:
        s.direct_solve_method = "faer"
    except Exception:  # older builds only ship qdldl
        pass
    cones = []
    if n_zero:
        cones.append(clarabel.ZeroConeT(n_zero))
    if n_nonneg:
        cones.append(clarabel.NonnegativeConeT(n_nonneg))
    solver = clarabel.DefaultSolver(P, q, A, b, cones, s)
    sol = solver.solve()
    return str(sol.status), np.asarray(sol.x), int(sol.iterations)


_RETRY_REG = (None, 1e-6, 1e-5)
_THREADS = None


def set_threads(n: int | None) -> None:
    """Thread count handed to the backend (``None`` leaves its default)."""
    global _THREADS
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _THREADS = n

_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "almost",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "iteration-limit",
    "MaxTime": "iteration-limit",
}


def solve(model: QpModel, tol: float = 1e-8, max_iter: int = 200, time_limit: float | None = None) -> SolveResult:
    """Scale, hand to the interior-point backend, unscale, audit."""
    t0 = time.perf_counter()
    A, lo, hi, _, quad, q = model.compile()
    lb, ub, s = model.lb, model.ub, model.scale
    if np.any(lb > ub + 1e-12 * np.maximum(1, np.abs(ub))):
        return SolveResult("infeasible", None, None, time.perf_counter() - t0, info={"reason": "crossed bounds"})
    fixed = lb >= ub
    free = np.flatnonzero(~fixed)
    xf = np.where(fixed, lb, 0.0)
    Ac = A.tocsc()
    Af = Ac[:, free]
    shift = Ac[:, np.flatnonzero(fixed)] @ xf[fixed] if np.any(fixed) else np.zeros(model.m)
    lo_f, hi_f = lo - shift, hi - shift
    sf = s[free]
    # column scaling x = s y, then unit inf-norm rows
    As = (Af @ sp.diags(sf)).tocsr()
    rn = np.asarray(abs(As).max(axis=1).todense()).ravel() if As.shape[0] else np.zeros(0)
    rn[rn == 0] = 1.0
    As = sp.diags(1.0 / rn) @ As
    lo_s, hi_s = lo_f / rn, hi_f / rn
    Pd = 2.0 * quad[free] * sf * sf
    qs = q[free] * sf
    oscale = max(np.abs(Pd).max(initial=0.0), np.abs(qs).max(initial=0.0), 1e-12)
    Pd, qs = Pd / oscale, qs / oscale

    eq = np.flatnonzero(lo_s == hi_s)
    up = np.flatnonzero((lo_s != hi_s) & np.isfinite(hi_s))
    dn = np.flatnonzero((lo_s != hi_s) & np.isfinite(lo_s))
    lbs, ubs = lb[free] / sf, ub[free] / sf
    bu = np.flatnonzero(np.isfinite(ubs))
    bl = np.flatnonzero(np.isfinite(lbs))
    nf = free.size
    I = sp.identity(nf, format="csr")
    blocks = [As[eq], As[up], -As[dn], I[bu], -I[bl]]
    rhs = np.concatenate([lo_s[eq], hi_s[up], -lo_s[dn], ubs[bu], -lbs[bl]])
    Ak = sp.vstack(blocks, format="csc") if nf else sp.csc_matrix((0, 0))
    P = sp.diags(Pd, format="csc")
    retries = 0
    if nf == 0:
        x = xf.copy()
        status, it = "optimal", 0
    else:
        # mostly-linear models can stall near the optimum; stronger static
        # regularisation usually gets through and the audit below still applies
        for reg in _RETRY_REG:
            raw, y, it = _clarabel_solve(P, qs, Ak, rhs, eq.size, Ak.shape[0] - eq.size, tol, max_iter, time_limit, reg)
            status = _STATUS.get(raw, "numerical-trouble")
            if raw not in ("NumericalError", "InsufficientProgress"):
                break
            retries += 1
        x = xf.copy()
        if y.size == nf and np.all(np.isfinite(y)):
            x[free] = y * sf
    elapsed = time.perf_counter() - t0
    info = {"backend": "clarabel", "scaled_rows": int(Ak.shape[0]) if nf else 0, "retries": retries}
    if status in ("optimal", "almost"):
        aud = audit(model, x)
        info["audit_row"] = aud.max_row
        info["audit_bound"] = aud.max_bound
        if status == "almost":
            # accepted only if the independent audit says the point is feasible
            status = "optimal" if aud.passed(1e-6) else "numerical-trouble"
            info["almost"] = True
        elif not aud.passed(1e-6):
            status = "numerical-trouble"
    if status != "optimal":
        return SolveResult(status, None, None, elapsed, it, info)
    return SolveResult(status, x, model.objective_value(x), elapsed, it, info)
