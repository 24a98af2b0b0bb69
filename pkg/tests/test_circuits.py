import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from ecmoef.circuits import (
    G,
    GasLine,
    GasPipe,
    HeatPipe,
    LumpedPi,
    gas_line,
    gas_lumped,
    gas_two_port,
    heat_characteristic_impedance,
    heat_line,
    heat_lumped,
    heat_propagation,
    heat_transmission_factor,
    heat_two_port,
)


def expm_gas(line, omega, length):
    """Independent oracle: matrix exponential of the first-order pipe ODE."""
    z = line.R + 1j * omega * line.L
    y = 1j * omega * line.C
    M = np.array([[-line.K, -z], [-y, 0.0]], dtype=complex)
    return scipy.linalg.expm(M * length)


def expm_heat(line, omega, length):
    z = line.R + 1j * omega * line.L
    y = line.G + 1j * omega * line.C
    M = np.array([[0.0, -z], [-y, 0.0]], dtype=complex)
    return scipy.linalg.expm(M * length)


PIPE = GasPipe(length=1000.0, diameter=0.5, area=0.19635, friction=0.01, sonic_speed=340.0, velocity=5.0)


def test_gas_line_reference_values():
    line = gas_line(PIPE)
    assert line.R == pytest.approx(0.50930, rel=1e-4)
    assert line.L == pytest.approx(5.0930, rel=1e-4)
    assert line.C == pytest.approx(1.6985e-6, rel=1e-4)
    assert line.K == pytest.approx(-2.1626e-6, rel=1e-4)


def test_friction_resistance_matches_linearised_friction_term():
    # d/dm of lambda*rho*v^2/(2D) with v = m/(rho S), at the base flow
    rho = 40.0
    S, D, lam, v = PIPE.area, PIPE.diameter, PIPE.friction, PIPE.velocity
    m0 = rho * v * S
    f = lambda m: lam * rho * (m / (rho * S)) ** 2 / (2 * D)
    h = 1e-4 * m0
    slope = (f(m0 + h) - f(m0 - h)) / (2 * h)
    assert gas_line(PIPE).R == pytest.approx(slope, rel=1e-8)


def test_zero_base_velocity_and_level_lossless():
    still = GasPipe(1000.0, 0.5, 0.01, 340.0, velocity=0.0, incline=0.3)
    line = gas_line(still)
    assert line.R == 0.0
    assert line.K == pytest.approx(G * np.sin(0.3) / 340.0**2, rel=1e-12)
    flat = GasPipe(1000.0, 0.5, 0.0, 340.0, velocity=3.0)
    assert gas_line(flat).K == 0.0


def test_invalid_geometry_rejected():
    with pytest.raises(ValueError):
        GasPipe(1000.0, 0.0, 0.01, 340.0, 5.0)
    with pytest.raises(ValueError):
        GasPipe(1000.0, 0.5, 0.01, 340.0, 5.0, area=-1.0)
    with pytest.raises(ValueError):
        GasPipe(1000.0, 0.5, 0.01, 340.0, 5.0, area=0.5)  # inconsistent with D
    with pytest.raises(ValueError):
        HeatPipe(100.0, 0.05, mass_flow=0.0)


@pytest.mark.parametrize("omega", [0.0, 1e-5, 7.3e-5, 3.5e-3])
@pytest.mark.parametrize("incline", [0.0, 0.2, -0.4])
def test_gas_two_port_matches_matrix_exponential(omega, incline):
    pipe = GasPipe(20e3, 0.6, 0.012, 350.0, 4.0, incline=incline)
    line = gas_line(pipe)
    tp = gas_two_port(line, omega, pipe.length)
    np.testing.assert_allclose(tp.matrix(), expm_gas(line, omega, pipe.length), rtol=1e-9, atol=1e-14)


def test_gas_two_port_reduces_to_reciprocal_form_when_k_vanishes():
    line = GasLine(R=0.4, L=5.0, C=1.7e-6, K=0.0)
    w, l = 2e-4, 5e3
    z, y = line.R + 1j * w * line.L, 1j * w * line.C
    gamma, zc = np.sqrt(z * y), np.sqrt(z / y)
    tp = gas_two_port(line, w, l)
    assert tp.A == pytest.approx(np.cosh(gamma * l), rel=1e-12)
    assert tp.D == pytest.approx(tp.A, rel=1e-12)
    assert tp.B == pytest.approx(-zc * np.sinh(gamma * l), rel=1e-12)
    assert tp.C == pytest.approx(-np.sinh(gamma * l) / zc, rel=1e-12)


def test_gas_steady_limit():
    line = GasLine(R=0.4, L=5.0, C=1.7e-6, K=0.0)
    tp = gas_two_port(line, 0.0, 3e3)
    assert (tp.A, tp.B, tp.C, tp.D) == pytest.approx((1, -0.4 * 3e3, 0, 1))
    # K != 0: p(l) = e^{-Kl} p0 - R m (1 - e^{-Kl})/K
    line = GasLine(R=0.4, L=5.0, C=1.7e-6, K=-3e-5)
    tp = gas_two_port(line, 0.0, 3e3)
    np.testing.assert_allclose(tp.matrix(), expm_gas(line, 0.0, 3e3), rtol=1e-12)


def test_gas_continuity_at_zero_frequency():
    line = gas_line(GasPipe(15e3, 0.5, 0.01, 340.0, 5.0, incline=0.05))
    a = gas_two_port(line, 0.0, 15e3).matrix()
    b = gas_two_port(line, 1e-9, 15e3).matrix()
    assert np.abs(a - b).max() <= 1e-6 * np.abs(a).max()


def test_gas_lumped_examples():
    line = GasLine(R=0.4, L=5.0, C=1.7e-6, K=0.0)
    pi = gas_lumped(gas_two_port(line, 0.0, 3e3))
    assert pi.Z == pytest.approx(0.4 * 3e3)
    assert pi.K == pytest.approx(0.0, abs=1e-15)
    assert pi.Y1 == pytest.approx(0.0, abs=1e-15)
    assert pi.Y2 == pytest.approx(0.0, abs=1e-15)
    # reciprocal input -> no controlled source
    pi = gas_lumped(gas_two_port(line, 1e-4, 3e3))
    assert abs(pi.K) < 1e-12


def test_lumped_degenerate_rejected():
    from ecmoef.circuits import TwoPort

    with pytest.raises(ValueError):
        gas_lumped(TwoPort(1, 0, 0, 1))
    with pytest.raises(ValueError):
        heat_lumped(TwoPort(1, 0, 0, 1))


def test_two_port_segment_composition():
    pipe = GasPipe(24e3, 0.5, 0.01, 340.0, 5.0, incline=0.1)
    half = GasPipe(12e3, 0.5, 0.01, 340.0, 5.0, incline=0.1)
    line = gas_line(pipe)
    for w in (0.0, 1e-4, 1e-3):
        whole = gas_two_port(line, w, pipe.length).matrix()
        parts = (gas_two_port(line, w, half.length) @ gas_two_port(line, w, half.length)).matrix()
        np.testing.assert_allclose(whole, parts, rtol=1e-9, atol=1e-12 * np.abs(whole).max())


HEAT = HeatPipe(length=2000.0, area=0.05, mass_flow=10.0, loss=1.0, specific_heat=4200.0, density=1000.0)


def test_heat_line_reference_values():
    line = heat_line(HEAT)
    assert line.R == pytest.approx(5.6689e-10, rel=1e-4)
    assert line.L == pytest.approx(1.1905e-4, rel=1e-4)
    assert line.G == 1.0
    assert line.C == pytest.approx(2.1e5)
    assert line.L * line.C == pytest.approx((1000 * 0.05 / 10.0) ** 2, rel=1e-12)
    lossless = heat_line(HeatPipe(2000.0, 0.05, 10.0, loss=0.0))
    assert lossless.R == 0 and lossless.G == 0


@pytest.mark.parametrize("omega", [0.0, 1e-5, 7.3e-5, 3.5e-3])
def test_heat_two_port_matches_matrix_exponential(omega):
    line = heat_line(HEAT)
    tp = heat_two_port(line, omega, HEAT.length)
    np.testing.assert_allclose(tp.matrix(), expm_heat(line, omega, HEAT.length), rtol=1e-9, atol=1e-20)


def test_heat_lossless_transport_delay():
    pipe = HeatPipe(2000.0, 0.05, 10.0, loss=0.0)
    line = heat_line(pipe)
    w = 2e-4
    delay = pipe.density * pipe.area * pipe.length / pipe.mass_flow
    assert heat_two_port(line, w, pipe.length).A == pytest.approx(np.cos(w * delay), abs=1e-12)
    phi = heat_transmission_factor(line, w, pipe.length)
    assert abs(phi) == pytest.approx(1.0, abs=1e-12)
    assert np.angle(phi * np.exp(1j * w * delay)) == pytest.approx(0.0, abs=1e-9)


def test_heat_dc_attenuation():
    line = heat_line(HEAT)
    assert heat_propagation(line, 0.0) == pytest.approx(HEAT.loss / (HEAT.specific_heat * HEAT.mass_flow))
    phi = heat_transmission_factor(line, 0.0, HEAT.length)
    assert phi.imag == 0
    assert phi.real == pytest.approx(np.exp(-HEAT.loss * HEAT.length / (HEAT.specific_heat * HEAT.mass_flow)))
    assert heat_transmission_factor(line, 0.0, 1e-12) == pytest.approx(1.0)


def test_heat_characteristic_impedance_lossless_dc_limit():
    pipe = HeatPipe(2000.0, 0.05, 10.0, loss=0.0, specific_heat=4200.0)
    line = heat_line(pipe)
    assert heat_characteristic_impedance(line, 0.0) == pytest.approx(1 / (4200.0 * 10.0))
    assert heat_characteristic_impedance(line, 1e-4) == pytest.approx(1 / (4200.0 * 10.0))


def test_heat_transmission_factor_consistent_with_two_port():
    line = heat_line(HEAT)
    cpm = HEAT.specific_heat * HEAT.mass_flow
    for w in (0.0, 3e-5, 1e-3):
        tp = heat_two_port(line, w, HEAT.length)
        T0 = 1.7 - 0.3j
        h0 = cpm * T0
        phi = heat_transmission_factor(line, w, HEAT.length)
        assert cpm * (tp.A * T0 + tp.B * h0) == pytest.approx(phi * h0, rel=1e-9)
        assert tp.C * T0 + tp.D * h0 == pytest.approx(phi * h0, rel=1e-9)


def test_heat_lumped_short_pipe_expansion():
    pipe = HeatPipe(1.0, 0.05, 10.0, loss=0.5)
    line = heat_line(pipe)
    w = 1e-3
    pi = heat_lumped(heat_two_port(line, w, pipe.length))
    # first-order terms; the next correction is O((gamma l)^2 / 12)
    assert pi.Z == pytest.approx((line.R + 1j * w * line.L) * pipe.length, rel=1e-5)
    assert pi.Y1 == pytest.approx((line.G + 1j * w * line.C) * pipe.length / 2, rel=1e-5)
    assert pi.Y1 == pi.Y2 and pi.K == 0


gas_pipes = st.builds(
    GasPipe,
    length=st.floats(100.0, 80e3),
    diameter=st.floats(0.1, 1.2),
    friction=st.floats(0.0, 0.03),
    sonic_speed=st.floats(250.0, 450.0),
    velocity=st.floats(0.0, 15.0),
    incline=st.floats(-0.5, 0.5),
)
heat_pipes = st.builds(
    HeatPipe,
    length=st.floats(10.0, 10e3),
    area=st.floats(1e-3, 0.5),
    mass_flow=st.floats(0.5, 300.0),
    loss=st.floats(0.0, 3.0),
)
omegas = st.one_of(st.just(0.0), st.floats(1e-7, 1e-2))


def _assert_round_trip(pi, tp, w):
    # rebuilding C subtracts terms of size |Y1|, |Z Y1 Y2|; near a half-wave
    # resonance those dwarf the entries and set the attainable accuracy
    back = pi.to_two_port(w)
    size = max(np.abs(tp.matrix()).max(), abs(pi.Y1), abs(pi.Z * pi.Y1 * pi.Y2))
    np.testing.assert_allclose(back.matrix(), tp.matrix(), rtol=1e-9, atol=1e-9 * size)


@settings(max_examples=200, deadline=None)
@given(gas_pipes, omegas)
def test_gas_determinant_and_round_trip(pipe, w):
    line = gas_line(pipe)
    tp = gas_two_port(line, w, pipe.length)
    expected = np.exp(-line.K * pipe.length)
    scale = max(abs(expected), abs(tp.A * tp.D), abs(tp.B * tp.C))
    assert abs(tp.det - expected) <= 1e-9 * scale
    if tp.B != 0:
        _assert_round_trip(gas_lumped(tp), tp, w)


@settings(max_examples=200, deadline=None)
@given(heat_pipes, omegas)
def test_heat_reciprocity_and_round_trip(pipe, w):
    line = heat_line(pipe)
    tp = heat_two_port(line, w, pipe.length)
    assert tp.A == tp.D
    # relative to the size of the products being differenced
    assert abs(tp.det - 1) <= 1e-9 * max(1.0, abs(tp.A * tp.D))
    phi = heat_transmission_factor(line, w, pipe.length)
    assert abs(phi) <= 1 + 1e-12
    if tp.B != 0:
        _assert_round_trip(heat_lumped(tp), tp, w)


def test_lumped_round_trip_identity():
    pi = LumpedPi(Z=3 + 2j, K=0.01 - 0.02j, Y1=1e-3j, Y2=2e-3 + 1e-3j)
    again = gas_lumped(pi.to_two_port())
    assert again.Z == pytest.approx(pi.Z)
    assert again.K == pytest.approx(pi.K)
    assert again.Y1 == pytest.approx(pi.Y1)
    assert again.Y2 == pytest.approx(pi.Y2)

