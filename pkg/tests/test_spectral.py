import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecmoef.spectral import (
    Horizon,
    analysis_matrix,
    evaluate,
    forward_dft,
    freedom_mask,
    idft_row,
    inverse_dft,
    n_freq,
    synthesis_rows,
    weights,
)


def test_hand_examples():
    np.testing.assert_allclose(forward_dft([1, 1, 1, 1]), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(forward_dft([1, 0, 1, 0]), [0.5, 0, 0.5], atol=1e-15)
    np.testing.assert_allclose(forward_dft([1, 0, 0, 0]), [0.25, 0.5, 0.25], atol=1e-15)
    np.testing.assert_allclose(inverse_dft([0.5, 0, 0.5], 4), [1, 0, 1, 0], atol=1e-15)
    np.testing.assert_array_equal(inverse_dft(np.zeros(3), 4), np.zeros(4))


def test_matches_numpy_fft():
    rng = np.random.default_rng(7)
    for n in (1, 2, 5, 8, 33, 192):
        x = rng.normal(size=n)
        ref = np.fft.rfft(x) / n
        ref[1:] *= 2
        if n % 2 == 0:
            ref[-1] /= 2
        np.testing.assert_allclose(forward_dft(x), ref, atol=1e-12)


def test_freedom_mask():
    assert freedom_mask(4) == {0, 2}
    assert freedom_mask(5) == {0}
    assert freedom_mask(1) == {0}
    for n in range(1, 60):
        assert 2 * n_freq(n) - len(freedom_mask(n)) == n
    with pytest.raises(ValueError):
        freedom_mask(0)


def test_weights():
    np.testing.assert_array_equal(weights(4), [1, 2, 1])
    np.testing.assert_array_equal(weights(5), [1, 2, 2])
    np.testing.assert_array_equal(weights(1), [1])


def test_idft_row_properties():
    n = 12
    np.testing.assert_array_equal(idft_row(n, 0), np.ones(n_freq(n)))
    R = synthesis_rows(n)
    F = analysis_matrix(n)
    np.testing.assert_allclose((R @ F).real, np.eye(n), atol=1e-12)
    # periodic extension
    np.testing.assert_allclose(synthesis_rows(n, [3 + n, 3 + 5 * n]), synthesis_rows(n, [3, 3]), atol=0)
    c = np.array([0.2, 1 - 2j, 0.3 + 0.1j, 2j, 0, 0, 1.5])
    row = idft_row(n, 5)
    lhs = (row @ c).real
    rhs = row.real @ c.real - row.imag @ c.imag
    assert lhs == pytest.approx(rhs)


def test_horizon():
    h = Horizon(96, 96, 900.0)
    assert h.n_t == 192 and h.n_f == 97
    np.testing.assert_array_equal(h.dispatch_index[[0, -1]], [96, 191])
    assert h.omega[1] == pytest.approx(2 * np.pi / (192 * 900.0))
    with pytest.raises(ValueError):
        Horizon(0, 0, 1.0)
    with pytest.raises(ValueError):
        Horizon(1, 1, 0.0)


def test_evaluate_on_grid_and_between():
    rng = np.random.default_rng(3)
    for n in (6, 7):
        x = rng.normal(size=n)
        c = forward_dft(x)
        np.testing.assert_allclose(evaluate(c, n, 60.0, np.arange(n) * 60.0), x, atol=1e-12)
    c = np.zeros(5, complex)
    c[1] = 2 * np.exp(0.4j)
    t = np.linspace(0, 8 * 60, 17)
    np.testing.assert_allclose(evaluate(c, 8, 60.0, t), 2 * np.cos(2 * np.pi * t / 480 + 0.4), atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 400), st.integers(0, 2**32 - 1))
def test_round_trip_and_parseval(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=10.0, size=n)
    c = forward_dft(x)
    np.testing.assert_allclose(inverse_dft(c, n), x, atol=1e-10, rtol=0)
    # freedom-degree components are real
    for k in freedom_mask(n):
        assert abs(c[k].imag) <= 1e-10 * (1 + np.abs(x).max())
    # one-sided Parseval: paired components carry half their squared magnitude
    v = weights(n)
    energy = np.sum(np.abs(c) ** 2 * np.where(v == 1, 1.0, 0.5))
    assert energy == pytest.approx(np.mean(x**2), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 64), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_linearity(n, a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, n))
    np.testing.assert_allclose(forward_dft(a * x + b * y), a * forward_dft(x) + b * forward_dft(y), atol=1e-12)
