"""The nine acceptance criteria, one test each.

Every test records a PASS/FAIL line (printed, and repeated in the terminal
summary) before asserting, so a failing criterion still reports its numbers.
"""

import time
from collections import Counter

import numpy as np
import pytest

from ecmoef import cases, compaction, fdm, oef
from ecmoef.circuits import GasPipe, HeatPipe, gas_line, gas_two_port, heat_line, heat_two_port
from ecmoef.flowcalc import balance_audit, is_secure, security_check
from ecmoef.network import GasNetwork, HeatNetwork
from ecmoef.qp import stats
from ecmoef.spectral import forward_dft, freedom_mask, inverse_dft, n_freq

import _counts as counts

DAY = 86400.0


# ----------------------------------------------------------------- 1


def test_criterion_1_circuit_identities(record):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst_gas = worst_heat = worst_sym = 0.0
    for _ in range(1000):
        # daily harmonics up to the Nyquist rate of 15 min sampling, DC included
        w = rng.integers(0, 49) * 2 * np.pi / DAY
        gp = GasPipe(
            rng.uniform(1e3, 50e3), rng.uniform(0.2, 1.2), rng.uniform(0.005, 0.02),
            rng.uniform(300.0, 440.0), rng.uniform(0.0, 10.0), incline=rng.uniform(-0.02, 0.02),
        )
        gl = gas_line(gp)
        tp = gas_two_port(gl, w, gp.length)
        expected = np.exp(-gl.K * gp.length)
        worst_gas = max(worst_gas, abs(tp.det - expected) / abs(expected))
        hp = HeatPipe(rng.uniform(50.0, 10e3), rng.uniform(2e-3, 0.5), rng.uniform(0.5, 300.0), rng.uniform(0.0, 3.0))
        tq = heat_two_port(heat_line(hp), w, hp.length)
        worst_heat = max(worst_heat, abs(tq.det - 1.0))
        worst_sym = max(worst_sym, abs(tq.A - tq.D) / abs(tq.A))
    elapsed = time.perf_counter() - t0
    ok = worst_gas <= 1e-9 and worst_heat <= 1e-9 and worst_sym <= 1e-9 and elapsed < 5.0
    record(1, ok, f"gas det rel {worst_gas:.2e}, heat det {worst_heat:.2e}, heat A-D {worst_sym:.2e}, {elapsed:.2f}s")


# ----------------------------------------------------------------- 2


def test_criterion_2_spectral_round_trip(record):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 401))
        x = rng.normal(size=n) * rng.uniform(0.1, 10.0)
        worst = max(worst, float(np.abs(inverse_dft(forward_dft(x), n) - x).max()))
    bad_counts = [n for n in range(1, 401) if 2 * n_freq(n) - len(freedom_mask(n)) != n]
    ok = worst <= 1e-10 and not bad_counts
    record(2, ok, f"max round-trip error {worst:.2e}, freedom count mismatches {len(bad_counts)}")


# ----------------------------------------------------------------- 3


def _single_pipes():
    gas = GasNetwork(2, [(0, 1)], [GasPipe(20e3, 0.3, 0.012, 340.0, 0.5)], reference=[0])
    heat = HeatNetwork(2, [(0, 1)], [HeatPipe(2000.0, np.pi * 0.25**2 / 4, 50.0, 0.8)])
    return gas, heat


def test_criterion_3_forward_simulation(record):
    gas, heat = _single_pipes()
    t0 = time.perf_counter()
    levels = []
    for lev in range(4):
        n, dt = 96 * 2**lev, 900.0 / 2**lev
        s = 2 * np.pi * np.arange(n) * dt / DAY
        wave = np.sin(s) + 0.3 * np.sin(2 * s + 1.0)
        g_inj = np.zeros((2, n))
        g_inj[1] = -(3.0 + wave)
        h_inj = np.zeros((2, n))
        h_inj[0] = 4182.0 * 50.0 * (70.0 + 8.0 * wave)
        res = fdm.forward_comparison(gas, g_inj, np.full((1, n), 5e6), heat, h_inj, dt, 200.0 / 2**lev, 100.0 / 2**lev, warmup=2)
        levels.append({k: (res[k]["rel_rms"][1], res[k]["swing_rms"][1]) for k in ("gas", "heat")})
    elapsed = time.perf_counter() - t0
    # gate on the swing-relative error, the stricter of the two
    first = max(levels[0]["gas"][1], levels[0]["heat"][1])
    mono = all(levels[i + 1][k][1] < levels[i][k][1] for i in range(3) for k in ("gas", "heat"))
    ok = first <= 0.01 and mono and elapsed < 60.0
    trail = ", ".join(f"{k} " + "/".join(f"{lv[k][1]:.1e}" for lv in levels) for k in ("gas", "heat"))
    record(3, ok, f"end-node swing RMS at default mesh {first:.2e}; refinements {trail}; monotone {mono}; {elapsed:.1f}s")


# ------------------------------------------------------- small scenario runs


@pytest.fixture(scope="module")
def small_runs():
    sc = cases.bundled("small")
    t0 = time.perf_counter()
    ecm, _ = oef.solve_variant(sc, "ecm")
    vsp, _ = oef.solve_variant(sc, "vsp")
    cga, trace = compaction.cga_solve(sc)
    fd, fbuilt = fdm.solve_fdm(sc)
    return {
        "sc": sc,
        "prep": oef.prepare(sc),
        "sols": {"ecm": ecm, "ecm-vsp": vsp, "ecm-vsp-cga": cga, "fdm": fd},
        "trace": trace,
        "elapsed": time.perf_counter() - t0,
    }


@pytest.mark.slow
def test_criterion_4_method_equivalence(small_runs, record):
    s = small_runs["sols"]
    statuses = {m: sol.status for m, sol in s.items()}
    ok = all(v == "optimal" for v in statuses.values())
    detail = f"statuses {statuses}"
    if ok:
        base = s["ecm"].objective
        rel = {m: abs(s[m].objective - base) / abs(base) for m in ("ecm-vsp", "ecm-vsp-cga")}
        gap = (s["fdm"].objective - base) / abs(base)
        ok = max(rel.values()) <= 1e-6 and abs(gap) <= 1e-3 and small_runs["elapsed"] < 600
        detail = (
            f"ECM {base:.6f}; rel diff VSP {rel['ecm-vsp']:.1e}, CGA {rel['ecm-vsp-cga']:.1e}; "
            f"FDM gap {gap:+.2e}; {small_runs['elapsed']:.0f}s"
        )
    record(4, ok, detail)


def _cga_checks(trace, n_r):
    obj = [o for o in trace.objectives if o is not None]
    monotone = all(b >= a - 1e-7 * abs(a) for a, b in zip(obj, obj[1:]))
    worst, pos = 0, 0
    for it in trace.iterations:
        n = sum(it.cuts_by_type.values())
        per = Counter((kind, tau) for kind, _, tau in trace.added[pos : pos + n])
        worst = max(worst, max(per.values(), default=0))
        pos += n
    return monotone, worst


@pytest.mark.slow
def test_criterion_5_cga_correctness(small_runs, record):
    parts, ok = [], True
    for name in cases.BUNDLED:
        if name == "small":
            prep, sol, trace = small_runs["prep"], small_runs["sols"]["ecm-vsp-cga"], small_runs["trace"]
        else:
            prep = oef.prepare(cases.bundled(name))
            sol, trace = compaction.cga_solve(prep)
        n_r = prep.sc.solver.n_r
        secure = sol.status == "optimal" and is_secure(security_check(prep, sol.monitored))
        monotone, worst = _cga_checks(trace, n_r)
        its = len(trace.iterations)
        ok &= secure and monotone and worst <= n_r and its <= 50
        parts.append(f"{name}: {its} iterations, secure {secure}, monotone {monotone}, max cuts per (type, step) {worst}/{n_r}")
    record(5, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_6_compaction_orderings(small_runs, record):
    s, prep = small_runs["sols"], small_runs["prep"]
    ecm, vsp, cga, fd = (s[m].stats for m in ("ecm", "ecm-vsp", "ecm-vsp-cga", "fdm"))
    drop = ecm.variables - vsp.variables
    formula = counts.monitored_vars(prep)
    checks = {
        "ECM <= 0.1 FDM vars": ecm.variables <= 0.1 * fd.variables,
        "VSP < 0.5 ECM vars": vsp.variables < 0.5 * ecm.variables,
        "drop = formula": drop == formula,
        "CGA rows < VSP rows": cga.constraints < vsp.constraints,
        "VSP nnz > ECM nnz": vsp.nonzeros > ecm.nonzeros,
    }
    detail = (
        f"vars FDM {fd.variables} / ECM {ecm.variables} / VSP {vsp.variables} (drop {drop}, formula {formula}); "
        f"rows VSP {vsp.constraints} / CGA {cga.constraints}; nnz ECM {ecm.nonzeros} / VSP {vsp.nonzeros}"
    )
    failed = [k for k, v in checks.items() if not v]
    record(6, not failed, detail + (f"; failed {failed}" if failed else ""))


@pytest.mark.slow
def test_criterion_7_timing_ordering(small_runs, record):
    s = small_runs["sols"]
    t = {m: s[m].timing["total"] for m in s}
    ok = t["ecm-vsp-cga"] < t["ecm"] < t["fdm"]
    record(
        7, ok,
        f"total CGA {t['ecm-vsp-cga']:.2f}s < ECM {t['ecm']:.2f}s < FDM {t['fdm']:.2f}s; "
        f"FDM/CGA ratio {t['fdm'] / t['ecm-vsp-cga']:.1f}x (not gated)",
    )


@pytest.mark.slow
def test_criterion_8_balance_audit(small_runs, record):
    prep, parts, ok = small_runs["prep"], [], True
    for m, sol in small_runs["sols"].items():
        if sol.status != "optimal":
            ok = False
            parts.append(f"{m}: {sol.status}")
            continue
        a = balance_audit(prep, sol.schedules)
        power, gas, heat = float(np.abs(a["power"]).max()), float(a["gas"]), float(a["heat"])
        good = power < 1e-6 and abs(gas) < 1e-6 and heat >= -1e-6
        text = f"{m}: power {power:.1e}, gas {gas:.1e}, heat {heat:+.1e}"
        if sol.phasors:
            good &= sol.dft_error < 1e-6
            text += f", dft pair {sol.dft_error:.1e}"
        ok &= good
        parts.append(text)
    record(8, ok, "; ".join(parts))


# ----------------------------------------------------------------- 9


@pytest.mark.slow
def test_criterion_9_scaling(record):
    sizes, parts, ok = [], [], True
    for k in (1, 2, 3):
        sc = cases.cascade(k)
        prep = oef.prepare(sc)
        ecm = stats(oef.build(prep, "ecm").model)
        rows, bounds = counts.ecm_rows(prep)
        closed_ok = ecm.variables == counts.ecm_vars(prep)
        closed_ok &= ecm.constraints + sum(ecm.bounds_by_label.values()) == counts.total_constraints(rows, bounds, prep)
        sol, trace = compaction.cga_solve(prep)
        ok &= closed_ok and sol.status == "optimal"
        sizes.append((ecm.variables, ecm.constraints + sum(ecm.bounds_by_label.values())))
        parts.append(f"{k}x: {ecm.variables} vars, {sizes[-1][1]} constraints, closed form {closed_ok}, CGA {sol.status} in {len(trace.iterations)}")
    dv = np.diff([v for v, _ in sizes])
    dc = np.diff([c for _, c in sizes])
    linear = dv[0] == dv[1] and dc[0] == dc[1]
    ok &= linear
    record(9, ok, "; ".join(parts) + f"; steps vars {dv.tolist()} constraints {dc.tolist()}")
