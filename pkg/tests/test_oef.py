import numpy as np
import pytest

from ecmoef import cases, oef
from ecmoef.flowcalc import balance_audit, evaluate_solution, is_secure, security_check
from ecmoef.qp import ModelError, stats

import _counts as counts


@pytest.fixture(scope="module")
def small_prep():
    return oef.prepare(cases.small())


def test_ecm_row_counts_closed_form(small_prep):
    built = oef.build(small_prep, "ecm")
    st = stats(built.model)
    rows, bounds = counts.ecm_rows(small_prep)
    for label, n in rows.items():
        assert st.rows_by_label.get(label, 0) == n, label
    for label, n in bounds.items():
        assert st.bounds_by_label.get(label, 0) == n, label
    # line rows touching a single device column are folded into its bounds
    lines = int(np.isfinite(small_prep.line_limit).sum())
    assert st.rows_by_label.get("epn-security", 0) + st.bounds_by_label.get("epn-security", 0) == lines * small_prep.n_d
    assert st.variables == counts.ecm_vars(small_prep)


def test_vsp_drops_exactly_the_monitored_variables(small_prep):
    ecm = stats(oef.build(small_prep, "ecm").model)
    vsp = stats(oef.build(small_prep, "vsp").model)
    assert ecm.variables - vsp.variables == counts.monitored_vars(small_prep)
    assert vsp.variables < 0.5 * ecm.variables
    assert "ngn-circuit" not in vsp.rows_by_label and "dhn-circuit" not in vsp.rows_by_label
    assert vsp.rows_by_label["ngn-security"] == small_prep.free.size * small_prep.n_d


def test_raw_model_has_no_security_rows(small_prep):
    raw = stats(oef.build(small_prep, "raw").model)
    vsp = stats(oef.build(small_prep, "vsp").model)
    sec = sum(vsp.rows_by_label.get(l, 0) for l in ("epn-security", "ngn-security", "dhn-security"))
    assert raw.constraints == vsp.constraints - sec
    assert raw.variables == vsp.variables


def test_unknown_variant(small_prep):
    with pytest.raises(ValueError):
        oef.build(small_prep, "fancy")
    with pytest.raises(ModelError):
        oef.build(small_prep, "ecm", epsilon=0.0)


def test_default_epsilon_is_positive_and_small(small_prep):
    eps = oef.default_epsilon(small_prep)
    assert 0 < eps < 1e-6


@pytest.fixture(scope="module")
def micro_solutions():
    sc = cases.micro()
    prep = oef.prepare(sc)
    return prep, {v: oef.solve_variant(prep, v)[0] for v in ("ecm", "vsp")}


def test_ecm_and_vsp_agree_on_micro(micro_solutions):
    _, sols = micro_solutions
    a, b = sols["ecm"], sols["vsp"]
    assert a.status == b.status == "optimal"
    assert a.objective == pytest.approx(b.objective, rel=1e-6)
    prep, _ = micro_solutions
    for kind, blocks in oef.TIME_BLOCKS.items():
        for i, dev in enumerate(prep.devices[kind]):
            gap = np.abs(a.schedules[blocks[0]][i] - b.schedules[blocks[0]][i]).max()
            assert gap <= 1e-6 * dev.ub, dev.name


def test_solution_audits(micro_solutions):
    prep, sols = micro_solutions
    for sol in sols.values():
        assert sol.dft_error < 1e-6
        audit = balance_audit(prep, sol.schedules)
        assert np.abs(audit["power"]).max() < 1e-6
        assert abs(audit["gas"]) < 1e-6
        assert audit["heat"] > -1e-6
        assert is_secure(security_check(prep, sol.monitored))
        assert sol.objective == pytest.approx(sol.w1 + sol.w2, rel=1e-9)


def test_monitored_state_matches_model_samples(micro_solutions):
    prep, sols = micro_solutions
    sol = sols["ecm"]
    again = evaluate_solution(prep, sol.schedules, sol.phasors)
    np.testing.assert_allclose(again.pressure, sol.monitored.pressure, rtol=1e-12)
    np.testing.assert_allclose(again.temperature, sol.monitored.temperature, rtol=1e-12)


def test_merged_series_keeps_history(micro_solutions):
    prep, sols = micro_solutions
    x = oef.merged_series(prep, "m_gw", sols["ecm"].schedules["m_gw"])
    assert x.shape == (1, prep.n_t)
    np.testing.assert_array_equal(x[:, : prep.n_h], prep.history["m_gw"])
