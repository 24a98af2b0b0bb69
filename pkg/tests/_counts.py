"""Closed-form model sizes from the scenario index sets."""

import numpy as np

from ecmoef import oef


def n_series(prep):
    return sum(len(prep.devices[kind]) for _, kind, _, _ in oef.FREQ_SERIES)


def device_vars(prep):
    return sum(len(prep.devices[k]) * len(b) for k, b in oef.TIME_BLOCKS.items()) * prep.n_d


def phasor_vars(prep):
    return 2 * prep.n_f * n_series(prep)


def monitored_vars(prep):
    """Monitored unknowns of the circuit model: phasors (re + im) and dispatch samples."""
    n_free, n_b, n_h = prep.free.size, prep.n_branch, prep.n_heat
    return 2 * prep.n_f * (n_free + n_b + n_h) + prep.n_d * (n_free + n_h)


def ecm_vars(prep):
    return device_vars(prep) + phasor_vars(prep) + monitored_vars(prep)


def vsp_vars(prep):
    return device_vars(prep) + phasor_vars(prep)


def _ramped(prep):
    return [d for k in oef.KINDS for d in prep.devices[k] if np.isfinite(d.ramp_up) or np.isfinite(d.ramp_down)]


def common_rows(prep):
    """Rows shared by every variant, plus the line rows (some of which fold into bounds)."""
    d = prep.n_d
    coupled = sum(len(prep.devices[k]) for k in ("ngu", "chp", "gb", "hp"))
    n_s = n_series(prep)
    return {
        "ramping": len(_ramped(prep)) * (d - 1),
        "coupling": coupled * d,
        "balance": d + (prep.gas is not None) + (prep.heat is not None),
        "tf-conversion": d * n_s,
        "historical-boundary": prep.n_h * n_s,
    }


def common_bounds(prep):
    return {"ramping": len(_ramped(prep)), "freedom": len(prep.mask) * n_series(prep)}


def line_rows(prep):
    return int(np.isfinite(prep.line_limit).sum()) * prep.n_d


def ecm_rows(prep):
    rows = common_rows(prep)
    f, d = prep.n_f, prep.n_d
    rows["ngn-circuit"] = 2 * f * prep.free.size
    rows["dhn-circuit"] = 2 * f * (prep.n_branch + prep.n_heat)
    rows["tf-conversion"] += d * (prep.free.size + prep.n_heat)
    bounds = common_bounds(prep)
    bounds["ngn-security"] = prep.free.size * d
    bounds["dhn-security"] = prep.n_heat * d
    return rows, bounds


def vsp_rows(prep):
    rows = common_rows(prep)
    rows["ngn-security"] = prep.free.size * prep.n_d
    rows["dhn-security"] = prep.n_heat * prep.n_d
    return rows, common_bounds(prep)


def total_constraints(rows, bounds, prep):
    """Every constraint, whether it ended up as a row or as a variable bound."""
    return sum(rows.values()) + sum(bounds.values()) + line_rows(prep)
