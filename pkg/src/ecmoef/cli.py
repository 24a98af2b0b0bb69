"""Command line: ``ecmoef {run,simulate,stats,compare,plot,scale}``.

Exit codes: 0 optimal and secure, 2 insecure after the iteration limit,
3 infeasible, 4 numerical trouble (or any other solver failure),
64 usage or scenario errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_INSECURE, EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 4, 64


class UsageError(Exception):
    pass


def exit_code(status: str, secure: bool | None = True) -> int:
    if status == "optimal":
        return EXIT_OK if secure in (True, None) else EXIT_INSECURE
    if status == "insecure":
        return EXIT_INSECURE
    if status == "infeasible":
        return EXIT_INFEASIBLE
    return EXIT_NUMERICAL


def resolve_scenario(arg: str, args=None):
    """A scenario file, or the name of a bundled scenario (``micro``, ``small``, ``cascade3x``)."""
    from .cases import bundled
    from .scenario import load_scenario

    path = Path(arg)
    if path.exists():
        sc = load_scenario(path)
    else:
        try:
            sc = bundled(arg)
        except (KeyError, ValueError):
            raise UsageError(f"no scenario file or bundled scenario named {arg!r}") from None
    if args is not None:
        so = sc.solver
        for flag, attr in (("epsilon", "epsilon"), ("n_r", "n_r"), ("max_iter", "max_iter"), ("tol", "tol"), ("mesh_gas", "dx_gas"), ("mesh_heat", "dx_heat")):
            v = getattr(args, flag, None)
            if v is not None:
                setattr(so, attr, v)
    return sc


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg, flush=True)


# ---------------------------------------------------------------- commands


def cmd_run(args) -> int:
    from .fdm import MeshConfig
    from .report import export_plots, run, save_report

    sc = resolve_scenario(args.scenario, args)

    def progress(it):
        obj = "-" if it.objective is None else f"{it.objective:.6f}"
        _say(args, f"  cga iteration {it.iteration}: objective {obj}, {it.violations} violations, {it.cuts} cuts, {it.solve_time:.3f}s")

    _say(args, f"{args.method} on {sc.name}: solving")
    report, _ = run(args.method, sc, progress=progress, mesh=MeshConfig.from_scenario(sc))
    out = Path(args.out or f"{sc.name}-{args.method}")
    out.mkdir(parents=True, exist_ok=True)
    save_report(report, out / "report.json")
    if args.plots and report.schedules:
        export_plots(report, out / "plots")
    obj = "-" if report.objective is None else f"{report.objective:.6f}"
    st = report.stats
    _say(args, f"status {report.status}  objective {obj}  secure {report.secure}")
    _say(args, f"variables {st.get('variables')}  constraints {st.get('constraints')}  nonzeros {st.get('nonzeros')}  total {report.timing.get('total', 0):.3f}s")
    _say(args, f"report written to {out / 'report.json'}")
    return exit_code(report.status, report.secure)


def cmd_stats(args) -> int:
    from . import compaction, fdm, oef
    from .qp import stats

    sc = resolve_scenario(args.scenario, args)
    prep = oef.prepare(sc)
    if args.method == "fdm":
        model = fdm.assemble_fdm_model(prep).model
    elif args.method == "ecm-vsp-cga":
        model = compaction.build_raw_model(prep).model
    else:
        model = oef.build(prep, "ecm" if args.method == "ecm" else "vsp").model
    s = asdict(stats(model))
    print(f"{args.method} on {sc.name}" + (" (relaxed starting model)" if args.method == "ecm-vsp-cga" else ""))
    for key in ("variables", "constraints", "nonzeros", "density"):
        print(f"  {key:12s} {s[key]}")
    for title in ("rows_by_label", "bounds_by_label"):
        print(f"  {title}:")
        for label, n in s[title].items():
            print(f"    {label:20s} {n}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from . import oef
    from .fdm import MeshConfig, forward_comparison, historical_injections
    from .scenario import _atomic_write

    sc = resolve_scenario(args.scenario, args)
    prep = oef.prepare(sc)
    if prep.n_h == 0:
        raise UsageError("simulate replays the historical interval; the scenario has none")
    mesh = MeshConfig.from_scenario(sc)
    g_inj, h_inj = historical_injections(prep)
    res = forward_comparison(
        prep.gas, g_inj, prep.p_ref[:, : prep.n_h] if prep.gas is not None else None,
        prep.heat, h_inj, sc.horizon.dt, mesh.dx_gas, mesh.dx_heat, warmup=args.warmup,
    )
    names = {"gas": [n.name for n in sc.ngn.nodes], "heat": [n.name for n in sc.dhn.nodes]}
    rows = ["network,node,rel_rms,swing_rms"]
    print(f"{'network':8s} {'node':10s} {'rel_rms':>12s} {'swing_rms':>12s}")
    for net, r in res.items():
        for i, name in enumerate(names[net]):
            print(f"{net:8s} {name:10s} {r['rel_rms'][i]:12.3e} {r['swing_rms'][i]:12.3e}")
            rows.append(f"{net},{name},{r['rel_rms'][i]:.6e},{r['swing_rms'][i]:.6e}")
    if args.out:
        _atomic_write(Path(args.out), "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .report import compare, load_report
    from .scenario import _atomic_write

    try:
        text, table = compare([load_report(p) for p in args.reports], scaling=args.scaling)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(text, end="")
    if args.csv:
        _atomic_write(Path(args.csv), table)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .report import export_plots, load_report

    try:
        paths = export_plots(load_report(args.report), args.out)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _say(args, f"{len(paths)} files written to {args.out}")
    return EXIT_OK


def cmd_scale(args) -> int:
    from .cases import cascade
    from .report import compare, run, save_report
    from .scenario import _atomic_write, save_scenario

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, worst = [], EXIT_OK
    for k in args.factors:
        if k < 1:
            raise UsageError("cascade factors must be >= 1")
        sc = cascade(k)
        save_scenario(sc, out / f"{sc.name}.yaml")
        _say(args, f"wrote {out / (sc.name + '.yaml')}")
        for method in args.run or ():
            report, _ = run(method, sc)
            save_report(report, out / f"{sc.name}-{method}.json")
            reports.append(report)
            worst = max(worst, exit_code(report.status, report.secure))
            _say(args, f"  {method}: {report.status}, {report.stats.get('variables')} variables, {report.timing.get('total', 0):.3f}s")
    if len(reports) >= 2:
        text, table = compare(reports, scaling=True)
        print(text, end="")
        _atomic_write(out / "scaling.csv", table)
    return worst


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    from .report import METHODS

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mesh-gas", type=float, metavar="M", help="gas spatial step for the mesh model (m)")
    common.add_argument("--mesh-heat", type=float, metavar="M", help="heat spatial step for the mesh model (m)")
    common.add_argument("--epsilon", type=float, help="smoothing weight of the phasor penalty")
    common.add_argument("--n-r", type=int, dest="n_r", help="cuts per violation type and step per iteration")
    common.add_argument("--max-iter", type=int, dest="max_iter", help="cut-loop iteration limit")
    common.add_argument("--tol", type=float, help="solver tolerance")
    common.add_argument("--threads", type=int, help="solver thread count")
    common.add_argument("-q", "--quiet", action="store_true")

    ap = argparse.ArgumentParser(prog="ecmoef", description="Dynamic optimal energy flow for electricity-gas-heat systems.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="solve a scenario and write a report")
    p.add_argument("method", choices=METHODS)
    p.add_argument("scenario", help="scenario file or bundled name")
    p.add_argument("-o", "--out", help="output directory (default <scenario>-<method>)")
    p.add_argument("--plots", action="store_true", help="also write plots next to the report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", parents=[common], help="replay the history through the mesh and circuit models")
    p.add_argument("scenario")
    p.add_argument("--warmup", type=int, default=1, help="warm-up periods before comparing")
    p.add_argument("-o", "--out", help="CSV file for the per-node discrepancies")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", parents=[common], help="model size without solving")
    p.add_argument("method", choices=METHODS)
    p.add_argument("scenario")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", parents=[common], help="tabulate several reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--scaling", action="store_true", help="reports form a scaling family")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", parents=[common], help="plots and CSV from a report")
    p.add_argument("report")
    p.add_argument("-o", "--out", default="plots")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("scale", parents=[common], help="generate cascade scenarios (and optionally solve them)")
    p.add_argument("factors", type=int, nargs="+")
    p.add_argument("-o", "--out", default="cascade")
    p.add_argument("--run", action="append", choices=METHODS, help="method to run on every scale (repeatable)")
    p.set_defaults(func=cmd_scale)
    return ap


def main(argv=None) -> int:
    from .network import NetworkError
    from .qp import ModelError, set_threads
    from .scenario import SchemaError

    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be >= 1")
            set_threads(args.threads)
        return args.func(args)
    except (UsageError, SchemaError, FileNotFoundError) as exc:
        print(f"ecmoef: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, NetworkError) as exc:
        print(f"ecmoef: model error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE if "infeasible" in str(exc) else EXIT_NUMERICAL


if __name__ == "__main__":
    np.seterr(all="ignore")
    sys.exit(main())
