"""Run reports: the pipelines behind ``ecmoef run``, JSON round trip, comparison tables, plots."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .scenario import Scenario, _atomic_write

METHODS = ("fdm", "ecm", "ecm-vsp", "ecm-vsp-cga")
MONITORED = ("line_flow", "pressure", "temperature")
# display unit per monitored kind: (factor, label)
_UNITS = {"line_flow": (1e-6, "MW"), "pressure": (1e-5, "bar"), "temperature": (1.0, "K above ambient")}


@dataclass
class RunReport:
    method: str
    scenario: str
    status: str
    objective: float | None
    w1: float | None
    w2: float | None
    stats: dict
    timing: dict
    solver: dict
    dt: float
    n_disp: int
    cga: dict | None = None
    schedules: dict = field(default_factory=dict)  # block -> {device: [values]}
    monitored: dict = field(default_factory=dict)  # kind -> {names, values, lb, ub}
    audit: dict = field(default_factory=dict)
    secure: bool | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        known = {f for f in cls.__dataclass_fields__}
        missing = {"method", "scenario", "status"} - set(doc)
        if missing:
            raise ValueError(f"report is missing {sorted(missing)}")
        return cls(**{k: v for k, v in doc.items() if k in known})


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _num(v):
    return float(v)  # also parses the "inf" / "-inf" strings written by _jsonable


def save_report(report: RunReport, path) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(_jsonable(report.to_dict()), indent=1, sort_keys=True) + "\n")
    return path


def load_report(path) -> RunReport:
    with open(path, encoding="utf-8") as fh:
        return RunReport.from_dict(json.load(fh))


# ------------------------------------------------------------------ running


def run(method: str, sc: Scenario, epsilon=None, n_r=None, max_iter=None, tol=None, mesh=None, progress=None):
    """Solve ``sc`` with one of :data:`METHODS`. Returns ``(RunReport, DispatchSolution)``."""
    from . import compaction, fdm, oef
    from .flowcalc import balance_audit, is_secure, security_check

    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    prep = oef.prepare(sc)
    trace = None
    if method == "fdm":
        sol, _ = fdm.solve_fdm(prep, mesh, tol)
    elif method == "ecm-vsp-cga":
        sol, trace = compaction.cga_solve(prep, n_r, max_iter, epsilon, tol, progress=progress)
    else:
        sol, _ = oef.solve_variant(prep, "ecm" if method == "ecm" else "vsp", epsilon, tol)
    report = RunReport(
        method=method,
        scenario=sc.name,
        status=sol.status,
        objective=sol.objective,
        w1=sol.w1,
        w2=sol.w2,
        stats=asdict(sol.stats) if sol.stats is not None else {},
        timing=dict(sol.timing),
        solver={k: v for k, v in sol.info.items() if k != "cga"},
        dt=float(sc.horizon.dt),
        n_disp=int(sc.horizon.n_disp),
        cga=trace.as_dict() if trace is not None else None,
    )
    if sol.schedules:
        names = {kind: [d.name for d in prep.devices[kind]] for kind in prep.devices}
        for kind, blocks in oef.TIME_BLOCKS.items():
            for block in blocks:
                if names[kind]:
                    report.schedules[block] = {n: sol.schedules[block][i] for i, n in enumerate(names[kind])}
        report.audit = {k: (np.abs(v).max() if np.ndim(v) else v) for k, v in balance_audit(prep, sol.schedules).items()}
        report.audit["dft_pair"] = sol.dft_error
    if sol.monitored is not None:
        st = sol.monitored
        lim = prep.line_limit
        p_lb, p_ub = prep.p_bounds() if prep.gas is not None else (np.zeros(0), np.zeros(0))
        t_lb, t_ub = prep.t_bounds() if prep.heat is not None else (np.zeros(0), np.zeros(0))
        report.monitored = {
            "line_flow": {"names": [l.name for l in sc.epn.lines], "values": st.line_flow, "lb": -lim, "ub": lim},
            "pressure": {"names": [n.name for n in sc.ngn.nodes], "values": st.pressure, "lb": p_lb, "ub": p_ub},
            "temperature": {"names": [n.name for n in sc.dhn.nodes], "values": st.temperature, "lb": t_lb, "ub": t_ub},
        }
        report.secure = is_secure(security_check(prep, st))
    return RunReport.from_dict(json.loads(json.dumps(_jsonable(report.to_dict())))), sol


# ---------------------------------------------------------------- compare

_COLUMNS = (
    "scenario",
    "method",
    "status",
    "objective",
    "variables",
    "constraints",
    "nonzeros",
    "density",
    "cga_iterations",
    "t_modeling",
    "t_optimizing",
    "t_security",
    "t_total",
)


def _row(r: RunReport) -> list[str]:
    st, tm = r.stats or {}, r.timing or {}
    f = lambda v, fmt: "" if v is None else format(float(v), fmt)
    return [
        r.scenario,
        r.method,
        r.status,
        f(r.objective, ".6f"),
        str(st.get("variables", "")),
        str(st.get("constraints", "")),
        str(st.get("nonzeros", "")),
        f(st.get("density"), ".6e"),
        str(len(r.cga["iterations"])) if r.cga else "",
        f(tm.get("modeling"), ".6f"),
        f(tm.get("optimizing"), ".6f"),
        f(tm.get("security"), ".6f"),
        f(tm.get("total"), ".6f"),
    ]


def compare(reports, scaling: bool = False) -> tuple[str, str]:
    """Side-by-side table of several reports. Returns ``(text, csv)``.

    Reports must share a scenario unless ``scaling`` is set, in which case
    rows are ordered by model size and the per-step growth is appended.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("compare needs at least two reports")
    names = {r.scenario for r in reports}
    if len(names) > 1 and not scaling:
        raise ValueError(f"reports come from different scenarios {sorted(names)}; pass the scaling flag for a family")
    if scaling:
        reports = sorted(reports, key=lambda r: (r.method, (r.stats or {}).get("variables", 0)))
    rows = [_row(r) for r in reports]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_COLUMNS)
    w.writerows(rows)
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(_COLUMNS)]
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(_COLUMNS))]
    lines += ["  ".join(v.ljust(widths[i]) for i, v in enumerate(r)) for r in rows]
    if scaling:
        for method in sorted({r.method for r in reports}):
            fam = [r for r in reports if r.method == method]
            if len(fam) < 2:
                continue
            dv = np.diff([r.stats.get("variables", 0) for r in fam])
            dc = np.diff([r.stats.get("constraints", 0) for r in fam])
            lines.append(
                f"{method}: variable steps {dv.tolist()}, constraint steps {dc.tolist()}"
                f" ({'linear' if len(set(dv)) == 1 and len(set(dc)) == 1 else 'not linear'})"
            )
    return "\n".join(lines) + "\n", buf.getvalue()


# ------------------------------------------------------------------ plots


def _save_fig(fig, path: Path) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".svg")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([format(float(v), ".10g") for v in row])
    return buf.getvalue()


def export_plots(report: RunReport, outdir) -> list[Path]:
    """Schedule and monitored-series plots (SVG) with the CSV behind each monitored node."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not report.schedules:
        raise ValueError("report has no schedules to plot")
    plt.rcParams["svg.hashsalt"] = "ecmoef"
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    hours = np.arange(report.n_disp) * report.dt / 3600.0
    written = []
    groups = {"power": ("P_",), "gas": ("m_",), "heat": ("h_",)}
    unit = {"power": (1e-6, "MW"), "gas": (1.0, "kg/s"), "heat": (1e-6, "MW")}
    for net, prefixes in groups.items():
        blocks = [b for b in report.schedules if b.startswith(prefixes)]
        if not blocks:
            continue
        fig, ax = plt.subplots(figsize=(7, 3.5))
        f, lab = unit[net]
        for b in blocks:
            for dev, vals in report.schedules[b].items():
                ax.plot(hours, np.asarray(vals, float) * f, label=f"{dev} ({b})")
        ax.set_xlabel("hour of dispatch day")
        ax.set_ylabel(lab)
        ax.legend(fontsize=6, ncol=2)
        fig.tight_layout()
        p = out / f"schedule_{net}.svg"
        _save_fig(fig, p)
        plt.close(fig)
        written.append(p)
    for kind in MONITORED:
        mon = report.monitored.get(kind)
        if not mon or not mon["names"]:
            continue
        f, lab = _UNITS[kind]
        names = mon["names"]
        vals = np.asarray(mon["values"], float)
        lb = np.array([_num(v) for v in mon["lb"]])
        ub = np.array([_num(v) for v in mon["ub"]])
        cols = min(4, len(names))
        rows = -(-len(names) // cols)
        fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 2.2 * rows), squeeze=False, sharex=True)
        sub = out / kind
        sub.mkdir(exist_ok=True)
        for i, name in enumerate(names):
            ax = axes[i // cols][i % cols]
            ax.plot(hours, vals[i] * f, color="C0")
            for bound in (lb[i], ub[i]):
                if np.isfinite(bound):
                    ax.axhline(bound * f, color="C3", linestyle="--", linewidth=0.8)
            ax.set_title(name, fontsize=8)
            ax.tick_params(labelsize=7)
            p = sub / f"{name}.csv"
            _atomic_write(p, _csv_text(("time", "value", "lb", "ub"), (hours * 3600.0, vals[i], np.full(hours.size, lb[i]), np.full(hours.size, ub[i]))))
            written.append(p)
        for j in range(len(names), rows * cols):
            axes[j // cols][j % cols].axis("off")
        fig.supylabel(lab, fontsize=8)
        fig.tight_layout()
        p = out / f"{kind}.svg"
        _save_fig(fig, p)
        plt.close(fig)
        written.append(p)
    return written
