"""Projected security rows and the cut loop over the relaxed model."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .flowcalc import VIOLATION_TYPES, evaluate_solution, is_secure, security_check
from .oef import (
    Built,
    Prepared,
    add_matrix,
    build,
    epn_rows,
    extract,
    prepare,
    project,
    projected_rows,
    solution_from,
)
from .qp import ModelError, solve


def project_security_rows(prep: Prepared, fv: dict | None = None) -> dict:
    """Affine maps of every monitored pressure and temperature sample (see :class:`ecmoef.oef.Projection`)."""
    if prep.gas is not None and not prep.ref.size:
        raise ModelError("gas network has no reference node")
    out = {}
    if prep.gas is not None and prep.free.size:
        out["gas"] = project(prep, fv, "gas")
    if prep.heat is not None:
        out["heat"] = project(prep, fv, "heat")
    return out


def build_vsp_model(sc_or_prep, epsilon=None) -> Built:
    prep = sc_or_prep if isinstance(sc_or_prep, Prepared) else prepare(sc_or_prep)
    return build(prep, "vsp", epsilon)


def build_raw_model(sc_or_prep, epsilon=None) -> Built:
    prep = sc_or_prep if isinstance(sc_or_prep, Prepared) else prepare(sc_or_prep)
    return build(prep, "raw", epsilon)


@dataclass
class CgaIteration:
    iteration: int
    solve_time: float
    objective: float | None
    violations: int
    cuts: int
    cuts_by_type: dict = field(default_factory=dict)


@dataclass
class CgaTrace:
    iterations: list = field(default_factory=list)
    status: str = "running"
    added: list = field(default_factory=list)  # (type, index, tau) in insertion order

    @property
    def objectives(self) -> list:
        return [it.objective for it in self.iterations]

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": [
                {
                    "iteration": it.iteration,
                    "solve_time": it.solve_time,
                    "objective": it.objective,
                    "violations": it.violations,
                    "cuts": it.cuts,
                    "cuts_by_type": dict(it.cuts_by_type),
                }
                for it in self.iterations
            ],
        }


def select_cuts(violations: dict, n_r: int, added: set) -> list:
    """Keep the ``n_r`` most severe new violations per type and dispatch step."""
    picked = []
    for kind in VIOLATION_TYPES:
        per_tau: dict = {}
        for rec in violations.get(kind, []):  # already sorted by severity
            key = (kind, rec.index, rec.tau)
            if key in added:
                continue
            bucket = per_tau.setdefault(rec.tau, [])
            if len(bucket) < n_r:
                bucket.append(rec)
        for tau in sorted(per_tau):
            picked.extend(per_tau[tau])
    return picked


def add_cuts(built: Built, projections: dict, records: list) -> int:
    """Append the rows behind each violation record (only the violated side)."""
    prep, model = built.prep, built.model
    added = 0
    for rec in records:
        net, side = rec.kind.split("-")
        if net == "epn":
            cols, coef, lo, hi, _ = epn_rows(prep, built.time_vars, [rec.index], [rec.tau])
        else:
            proj = projections["gas" if net == "ngn" else "heat"]
            if net == "ngn":
                lb, ub = prep.p_bounds()
                pos = int(np.flatnonzero(proj.nodes == rec.index)[0])
                lb, ub = lb[proj.nodes], ub[proj.nodes]
            else:
                lb, ub = prep.t_bounds()
                pos = rec.index
            c, coef, lo, hi = projected_rows(proj, lb, ub, [(pos, rec.tau)])
            cols = c[None, :]
        lo = np.full(1, -np.inf) if side == "ub" else lo[:1]
        hi = np.full(1, np.inf) if side == "lb" else hi[:1]
        label = {"epn": "epn-security", "ngn": "ngn-security", "dhn": "dhn-security"}[net]
        added += add_matrix(model, np.broadcast_to(cols, coef.shape), coef, lo, hi, label)
    return added


def cga_solve(sc_or_prep, n_r: int | None = None, max_iter: int | None = None, epsilon=None, tol=None, progress=None):
    """Solve the relaxed model, add the worst violated security rows, repeat.

    Returns ``(DispatchSolution, CgaTrace)``. The solution status is
    ``optimal`` when the final point passes the full security check,
    ``insecure`` when ``max_iter`` runs out, or the solver status of the
    failing iteration (``info["iteration"]`` says which). ``progress`` is
    called with each finished :class:`CgaIteration`.
    """
    t0 = time.perf_counter()
    prep = sc_or_prep if isinstance(sc_or_prep, Prepared) else prepare(sc_or_prep)
    opts = prep.sc.solver
    n_r = opts.n_r if n_r is None else n_r
    max_iter = opts.max_iter if max_iter is None else max_iter
    tol = opts.tol if tol is None else tol
    if n_r < 1 or max_iter < 1:
        raise ValueError("n_r and max_iter must be >= 1")
    built = build(prep, "raw", epsilon)
    projections = project_security_rows(prep, built.phasor_vars)
    timing = {"modeling": time.perf_counter() - t0, "optimizing": 0.0, "security": 0.0}
    trace = CgaTrace()
    added: set = set()
    res = None
    state = None
    for it in range(1, max_iter + 1):
        res = solve(built.model, tol=tol)
        timing["optimizing"] += res.solve_time
        if not res.ok:
            trace.iterations.append(CgaIteration(it, res.solve_time, None, 0, 0))
            if progress:
                progress(trace.iterations[-1])
            trace.status = res.status
            timing["total"] = time.perf_counter() - t0
            sol = solution_from(built, res, "ecm-vsp-cga", timing)
            sol.info["iteration"] = it
            sol.info["cga"] = trace.as_dict()
            return sol, trace
        ts = time.perf_counter()
        schedules, phasors = extract(built, res.x)
        state = evaluate_solution(prep, schedules, phasors)
        viol = security_check(prep, state, iteration=it)
        n_viol = sum(len(v) for v in viol.values())
        if is_secure(viol):
            timing["security"] += time.perf_counter() - ts
            trace.iterations.append(CgaIteration(it, res.solve_time, res.objective, 0, 0))
            if progress:
                progress(trace.iterations[-1])
            trace.status = "optimal"
            break
        picked = select_cuts(viol, n_r, added)
        tm = time.perf_counter()
        n_cut = add_cuts(built, projections, picked)
        for rec in picked:
            added.add((rec.kind, rec.index, rec.tau))
            trace.added.append((rec.kind, rec.index, rec.tau))
        timing["security"] += tm - ts
        timing["modeling"] += time.perf_counter() - tm
        by_type = {k: sum(1 for r in picked if r.kind == k) for k in VIOLATION_TYPES if any(r.kind == k for r in picked)}
        trace.iterations.append(CgaIteration(it, res.solve_time, res.objective, n_viol, n_cut, by_type))
        if progress:
            progress(trace.iterations[-1])
        if not picked:
            # every violated row is already in the model: the solver point is off by more than the tolerance
            trace.status = "insecure"
            break
    else:
        trace.status = "insecure"
    timing["total"] = time.perf_counter() - t0
    sol = solution_from(built, res, "ecm-vsp-cga", timing, monitored=state)
    sol.status = trace.status
    sol.info["cga"] = trace.as_dict()
    return sol, trace
