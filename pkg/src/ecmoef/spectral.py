"""One-sided discrete Fourier analysis and synthesis.

Phasors follow the dispatch convention: coefficient ``k`` of an ``n``-point
real series is ``v(k)/n * sum_t x[t] exp(-2j*pi*k*t/n)`` with ``v = 1`` at
DC and at Nyquist (``2k == n``) and ``v = 2`` otherwise, so that

    x[t] = sum_k Re(c[k] * exp(2j*pi*k*t/n)),   k = 0 .. n//2.

Everything here is a dense O(n^2) matrix product; the explicit synthesis
rows are what the optimisation models are built from.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Horizon:
    """Historical + dispatch time axis.

    Indices ``0 .. n_hist-1`` are historical points, ``n_hist .. n_t-1`` the
    dispatch points. ``dt`` is the step in seconds.
    """

    n_hist: int
    n_disp: int
    dt: float

    def __post_init__(self):
        if self.n_hist < 0 or self.n_disp < 1:
            raise ValueError(f"invalid horizon: n_hist={self.n_hist}, n_disp={self.n_disp}")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")

    @property
    def n_t(self) -> int:
        return self.n_hist + self.n_disp

    @property
    def n_f(self) -> int:
        return n_freq(self.n_t)

    @property
    def dispatch_index(self) -> np.ndarray:
        return np.arange(self.n_hist, self.n_t)

    @property
    def omega(self) -> np.ndarray:
        """Angular frequency of every phasor component (rad/s)."""
        return 2.0 * np.pi * np.arange(self.n_f) / (self.n_t * self.dt)


def n_freq(n_t: int) -> int:
    return 1 + n_t // 2


def weights(n_t: int) -> np.ndarray:
    """The one-sided magnitude factor v(k)."""
    v = np.full(n_freq(n_t), 2.0)
    v[0] = 1.0
    if n_t % 2 == 0:
        v[-1] = 1.0
    return v


def freedom_mask(n_t: int) -> set[int]:
    """Components whose imaginary part carries no freedom (DC, and Nyquist for even n)."""
    if n_t < 1:
        raise ValueError("series length must be >= 1")
    return {0, n_t // 2} if n_t % 2 == 0 else {0}


def analysis_matrix(n_t: int) -> np.ndarray:
    """Complex (n_f, n_t) matrix ``F`` with ``forward_dft(x) == F @ x``."""
    k = np.arange(n_freq(n_t))[:, None]
    t = np.arange(n_t)[None, :]
    return weights(n_t)[:, None] / n_t * np.exp(-2j * np.pi * k * t / n_t)


def synthesis_rows(n_t: int, taus=None) -> np.ndarray:
    """Complex (len(taus), n_f) matrix of ``w**(tau*k)`` with ``w = exp(2j*pi/n_t)``.

    ``Re(rows @ c)`` is the synthesised series at ``taus``. Exponents are
    reduced modulo ``n_t`` first so large indices keep full precision.
    """
    taus = np.arange(n_t) if taus is None else np.atleast_1d(np.asarray(taus, dtype=np.int64))
    k = np.arange(n_freq(n_t), dtype=np.int64)
    e = np.mod(taus[:, None] * k[None, :], n_t)
    return np.exp(2j * np.pi * e / n_t)


def idft_row(n_t: int, tau: int) -> np.ndarray:
    return synthesis_rows(n_t, [tau])[0]


def forward_dft(x) -> np.ndarray:
    """One-sided phasors of a real series (last axis is time)."""
    x = np.asarray(x, dtype=float)
    n_t = x.shape[-1]
    if n_t < 1:
        raise ValueError("series length must be >= 1")
    return x @ analysis_matrix(n_t).T


def inverse_dft(c, n_t: int, taus=None) -> np.ndarray:
    """Real series from one-sided phasors (last axis is frequency)."""
    c = np.asarray(c, dtype=complex)
    if c.shape[-1] != n_freq(n_t):
        raise ValueError(f"expected {n_freq(n_t)} components for n_t={n_t}, got {c.shape[-1]}")
    return (c @ synthesis_rows(n_t, taus).T).real


def evaluate(c, n_t: int, dt: float, times) -> np.ndarray:
    """Trigonometric interpolant of the phasors at arbitrary times (s).

    The Nyquist term is taken as ``Re(c) cos`` so that the interpolant is
    real at off-grid times and matches the samples on-grid.
    """
    c = np.asarray(c, dtype=complex)
    times = np.asarray(times, dtype=float)
    period = n_t * dt
    k = np.arange(n_freq(n_t))
    phase = np.exp(2j * np.pi * np.outer(times, k) / period)
    cc = c.copy()
    if n_t % 2 == 0:
        cc[..., -1] = cc[..., -1].real
    return (cc @ phase.T).real
