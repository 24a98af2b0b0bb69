import numpy as np
import pytest

from ecmoef import cases, fdm, oef
from ecmoef.circuits import GasPipe, HeatPipe
from ecmoef.network import GasNetwork, HeatNetwork


def gas_single(length=20e3):
    return GasNetwork(2, [(0, 1)], [GasPipe(length, 0.3, 0.012, 340.0, 0.5)], reference=[0])


def heat_single(length=2000.0, mass_flow=50.0, loss=0.8):
    return HeatNetwork(2, [(0, 1)], [HeatPipe(length, 0.049, mass_flow, loss)])


def test_segment_counts():
    assert fdm.n_segments(1000.0, 200.0) == 5
    assert fdm.n_segments(1001.0, 200.0) == 6
    assert fdm.n_segments(50.0, 200.0) == 1
    with pytest.raises(ValueError):
        fdm.MeshConfig(dx_gas=0.0)


def test_gas_steady_state_is_a_fixed_point():
    net = gas_single()
    gm = fdm.discretize_gas(net, 200.0, 900.0)
    inj, pref = np.array([0.0, -3.0]), np.array([5e6])
    z = fdm.steady_gas(gm, inj, pref)
    Z = fdm.simulate_gas(gm, np.tile(inj[:, None], 5), np.full((1, 5), 5e6), z0=z)
    np.testing.assert_allclose(Z, np.tile(z[:, None], 5), rtol=1e-12, atol=1e-9)
    # uniform flow, pressure drop matches the steady line solution
    m = z[gm.flow_cols(0)]
    np.testing.assert_allclose(m, 3.0, rtol=1e-10)
    line, L = net.lines[0], net.pipes[0].length
    K, R = line.K, line.R
    exact = 5e6 * np.exp(-K * L) - R * 3.0 * (1 - np.exp(-K * L)) / K if K else 5e6 - R * 3.0 * L
    p_end = z[gm.node_col(1)]
    assert abs(p_end - exact) <= 1e-6 * abs(5e6 - exact)


def test_gas_line_pack_balance():
    """Mass stored in the pipe changes by exactly the net end flow over each step."""
    net = gas_single()
    gm = fdm.discretize_gas(net, 200.0, 600.0)
    t = np.arange(96)
    inj = np.zeros((2, 96))
    inj[1] = -(3.0 + np.sin(2 * np.pi * t / 96))
    Z = fdm.simulate_gas(gm, inj, np.full((1, 96), 5e6))
    C, dx = net.lines[0].C, gm.dx[0]
    p = Z[gm.pressure_cols(0)]
    m = Z[gm.flow_cols(0)]
    pack = C * dx * 0.5 * (p[:-1] + p[1:]).sum(axis=0)
    change = np.diff(pack)
    through = gm.dt * (m[0, 1:] - m[-1, 1:])
    np.testing.assert_allclose(change, through, rtol=0, atol=1e-6 * np.abs(through).max())
    assert np.abs(change).max() > 0


def test_heat_zero_perturbation_stays_steady():
    hm = fdm.discretize_heat(heat_single(), 100.0, 900.0)
    inj = np.zeros((2, 40))
    inj[0] = 4182.0 * 50.0 * 60.0
    Z = fdm.simulate_heat(hm, inj)
    np.testing.assert_allclose(Z, np.tile(Z[:, :1], 40), rtol=1e-12)


def test_heat_steady_attenuation():
    m, loss, L, cp = 50.0, 0.8, 2000.0, 4182.0
    hm = fdm.discretize_heat(heat_single(L, m, loss), 10.0, 900.0)
    z = fdm.steady_heat(hm, np.array([cp * m * 60.0, 0.0]))
    ratio = z[hm.node_col(1)] / z[hm.node_col(0)]
    assert ratio == pytest.approx(np.exp(-loss * L / (cp * m)), rel=1e-5)


def test_heat_transport_delay():
    L, m, area = 2000.0, 50.0, 0.049
    v = m / (1000.0 * area)
    hm = fdm.discretize_heat(heat_single(L, m, 0.0), 5.0, 5.0)
    steps = int(2 * L / v / 5.0)
    inj = np.zeros((2, steps))
    inj[0] = 4182.0 * m * 10.0
    inj[0, 1:] = 4182.0 * m * 20.0  # step from 10 to 20 K
    Z = fdm.simulate_heat(hm, inj)
    out = Z[hm.node_col(1)]
    t_half = np.argmax(out >= 15.0) * 5.0
    assert t_half == pytest.approx(L / v, rel=0.05)
    assert out[: int(0.5 * L / v / 5.0)].max() < 10.5  # nothing arrives early


def _device_vars(prep):
    return sum(len(prep.devices[k]) * len(b) for k, b in oef.TIME_BLOCKS.items()) * prep.n_d


def test_variable_count_closed_form():
    sc = cases.micro()
    prep = oef.prepare(sc)
    built = fdm.assemble_fdm_model(prep)
    gas_pts = sum(2 * (fdm.n_segments(p.pipe.length, sc.solver.dx_gas) + 1) for p in sc.ngn.pipes) + len(sc.ngn.nodes)
    heat_pts = sum(fdm.n_segments(p.pipe.length, sc.solver.dx_heat) + 1 for p in sc.dhn.pipes) + len(sc.dhn.nodes)
    assert built.model.n == _device_vars(prep) + prep.n_d * (gas_pts + heat_pts)


def test_micro_dispatch_is_close_to_circuit_model():
    sc = cases.micro()
    a, _ = fdm.solve_fdm(sc)
    b, _ = oef.solve_variant(sc, "ecm")
    assert a.status == b.status == "optimal"
    assert abs(a.w1 - b.w1) <= 1e-3 * abs(b.w1)


def test_forward_comparison_single_pipes():
    t = np.arange(96)
    wave = np.sin(2 * np.pi * t / 96)
    gas_inj = np.zeros((2, 96))
    gas_inj[1] = -(3.0 + wave)
    heat_inj = np.zeros((2, 96))
    heat_inj[0] = 4182.0 * 50.0 * (70.0 + 8.0 * wave)
    res = fdm.forward_comparison(gas_single(), gas_inj, np.full((1, 96), 5e6), heat_single(), heat_inj, warmup=2)
    assert res["gas"]["swing_rms"][1] < 0.01
    assert res["heat"]["swing_rms"][1] < 0.01
    assert np.isnan(res["gas"]["swing_rms"][0])
    with pytest.raises(ValueError):
        fdm.forward_comparison(gas_single(), gas_inj, np.full((1, 96), 5e6), warmup=0)
