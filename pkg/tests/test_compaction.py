from collections import Counter

import numpy as np
import pytest

from ecmoef import cases, compaction, oef
from ecmoef.flowcalc import ViolationRecord, is_secure, security_check
from ecmoef.qp import stats


def cut_batches(trace):
    out, pos = [], 0
    for it in trace.iterations:
        n = sum(it.cuts_by_type.values())
        out.append(trace.added[pos : pos + n])
        pos += n
    assert pos == len(trace.added)
    return out


def check_trace(trace, n_r):
    obj = [o for o in trace.objectives if o is not None]
    assert all(b >= a - 1e-7 * abs(a) for a, b in zip(obj, obj[1:]))
    for batch in cut_batches(trace):
        per = Counter((kind, tau) for kind, _, tau in batch)
        assert max(per.values(), default=0) <= n_r
    assert len(set(trace.added)) == len(trace.added)


@pytest.fixture(scope="module")
def small_prep():
    return oef.prepare(cases.small())


@pytest.mark.parametrize("n_r", [1, 3])
def test_cga_on_small(small_prep, n_r):
    seen = []
    sol, trace = compaction.cga_solve(small_prep, n_r=n_r, progress=seen.append)
    assert sol.status == "optimal" and trace.status == "optimal"
    assert len(seen) == len(trace.iterations) <= 50
    assert len(trace.iterations) > 1  # the relaxed model violates something on this scenario
    check_trace(trace, n_r)
    assert is_secure(security_check(small_prep, sol.monitored))
    assert trace.iterations[-1].violations == 0


def test_cga_matches_full_projection(small_prep):
    cga, _ = compaction.cga_solve(small_prep)
    vsp, _ = oef.solve_variant(small_prep, "vsp")
    assert cga.objective == pytest.approx(vsp.objective, rel=1e-6)
    assert cga.stats.constraints < vsp.stats.constraints


def test_cga_iteration_limit(small_prep):
    sol, trace = compaction.cga_solve(small_prep, max_iter=1)
    assert sol.status == "insecure" and trace.status == "insecure"
    assert len(trace.iterations) == 1


def test_bad_options(small_prep):
    with pytest.raises(ValueError):
        compaction.cga_solve(small_prep, n_r=0)


def test_select_cuts_keeps_worst_new_per_type_and_step():
    rec = lambda kind, i, t, mag: ViolationRecord(kind, i, t, mag)
    viol = {
        "ngn-lb": [rec("ngn-lb", 2, 5, 9.0), rec("ngn-lb", 1, 5, 4.0), rec("ngn-lb", 3, 6, 1.0)],
        "dhn-ub": [rec("dhn-ub", 0, 5, 2.0)],
    }
    picked = compaction.select_cuts(viol, 1, set())
    assert [(r.kind, r.index, r.tau) for r in picked] == [("ngn-lb", 2, 5), ("ngn-lb", 3, 6), ("dhn-ub", 0, 5)]
    picked = compaction.select_cuts(viol, 1, {("ngn-lb", 2, 5)})
    assert ("ngn-lb", 1, 5) in [(r.kind, r.index, r.tau) for r in picked]
    assert len(compaction.select_cuts(viol, 5, set())) == 4


def test_micro_needs_a_single_iteration():
    sol, trace = compaction.cga_solve(cases.micro())
    assert sol.status == "optimal" and len(trace.iterations) == 1
    raw = stats(compaction.build_raw_model(cases.micro()).model)
    assert sol.stats.constraints == raw.constraints
