"""Frequency-domain pipeline circuits.

A linearised gas pipe and a quality-regulated heat pipe both reduce, per
angular frequency, to a 2x2 transfer matrix between their two ends::

    [x(l), f(l)] = [[A, B], [C, D]] @ [x(0), f(0)]

where ``x`` is the potential (pressure or relative temperature) and ``f``
the flow (mass flow or heat flow) travelling in the +x direction. The
transfer matrix is evaluated in a branch-free form: with ``z`` the series
impedance and ``y`` the shunt admittance per metre, every entry is built from
``cosh(s l/2)`` and ``sinh(s l/2)/(s/2)``, both even in ``s``, so the choice
of complex square root never matters and the zero-frequency limit needs no
special casing beyond the ``s -> 0`` value of the sinc-like factor.
"""

from dataclasses import dataclass

import numpy as np

G = 9.80665  # m/s^2

_SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class GasPipe:
    """Geometry and linearisation point of one gas pipeline.

    ``area`` defaults to ``pi d^2 / 4``; if both are given they must agree to 1%.
    ``velocity`` is the base flow velocity the friction term is linearised at.
    """

    length: float
    diameter: float
    friction: float
    sonic_speed: float
    velocity: float
    incline: float = 0.0
    area: float | None = None

    def __post_init__(self):
        if not (self.length > 0 and self.diameter > 0):
            raise ValueError(f"invalid gas pipe geometry: length={self.length}, diameter={self.diameter}")
        if self.friction < 0 or not self.sonic_speed > 0:
            raise ValueError("friction must be >= 0 and sonic speed > 0")
        circle = np.pi * self.diameter**2 / 4
        if self.area is None:
            object.__setattr__(self, "area", circle)
        elif not self.area > 0:
            raise ValueError(f"cross section must be positive, got {self.area}")
        elif abs(self.area - circle) > 0.01 * circle:
            raise ValueError(f"cross section {self.area} inconsistent with diameter {self.diameter}")


@dataclass(frozen=True)
class HeatPipe:
    """A supply pipe under quality regulation (fixed water mass flow)."""

    length: float
    area: float
    mass_flow: float
    loss: float = 0.0  # heat dissipation, W/(m K)
    specific_heat: float = 4182.0
    density: float = 1000.0

    def __post_init__(self):
        if not (self.length > 0 and self.area > 0):
            raise ValueError(f"invalid heat pipe geometry: length={self.length}, area={self.area}")
        if not self.mass_flow > 0:
            raise ValueError("quality regulation needs a positive water mass flow")
        if self.loss < 0 or not (self.specific_heat > 0 and self.density > 0):
            raise ValueError("loss must be >= 0; specific heat and density positive")


@dataclass(frozen=True)
class GasLine:
    """Per-metre parameters of the linearised gas equations.

    dp/dx + L dm/dt + R m + K p = 0,   dm/dx + C dp/dt = 0
    """

    R: float
    L: float
    C: float
    K: float


@dataclass(frozen=True)
class HeatLine:
    """Per-metre parameters of the thermal telegrapher form.

    dT/dx + L dh/dt + R h = 0,   dh/dx + C dT/dt + G T = 0
    """

    R: float
    L: float
    G: float
    C: float


@dataclass(frozen=True)
class TwoPort:
    A: complex
    B: complex
    C: complex
    D: complex
    omega: float = 0.0

    @property
    def det(self) -> complex:
        return self.A * self.D - self.B * self.C

    def matrix(self) -> np.ndarray:
        return np.array([[self.A, self.B], [self.C, self.D]], dtype=complex)

    def __matmul__(self, other: "TwoPort") -> "TwoPort":
        m = self.matrix() @ other.matrix()
        return TwoPort(m[0, 0], m[0, 1], m[1, 0], m[1, 1], self.omega)


@dataclass(frozen=True)
class LumpedPi:
    """Pi-equivalent: series ``Z`` with controlled source ``K``, shunts ``Y1`` (inlet) and ``Y2`` (outlet).

    Heat pipes are reciprocal, so ``K == 0`` and ``Y1 == Y2``.
    """

    Z: complex
    K: complex
    Y1: complex
    Y2: complex

    def to_two_port(self, omega: float = 0.0) -> TwoPort:
        # m(0) = m_s + Y1 p0, m_s = ((1-K) p0 - pl)/Z, m(l) = m_s - Y2 pl
        A = 1 - self.K + self.Z * self.Y1
        B = -self.Z
        C = -self.Y1 - self.Y2 * A
        D = 1 - self.Y2 * B
        return TwoPort(A, B, C, D, omega)


def gas_line(pipe: GasPipe, g: float = G) -> GasLine:
    S, D, lam, v, c2 = pipe.area, pipe.diameter, pipe.friction, pipe.velocity, pipe.sonic_speed**2
    return GasLine(
        R=lam * v / (S * D),
        L=1.0 / S,
        C=S / c2,
        K=(2 * D * g * np.sin(pipe.incline) - lam * v**2) / (2 * D * c2),
    )


def heat_line(pipe: HeatPipe) -> HeatLine:
    cp, rho, S, m, mu = pipe.specific_heat, pipe.density, pipe.area, pipe.mass_flow, pipe.loss
    return HeatLine(R=mu / cp**2 / m**2, L=rho * S / cp / m**2, G=mu, C=cp * rho * S)


def _cosh_shc(u):
    """Return ``(cosh(u), sinh(u)/u)`` with a series branch near zero."""
    u = np.asarray(u, dtype=complex)
    small = np.abs(u) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, u)
    ch = np.cosh(u)
    shc = np.where(small, 1 + u * u / 6, np.sinh(safe) / safe)
    return ch, shc


def _cosh_shc_scaled(u, shift):
    """``exp(shift) * cosh(u)`` and ``exp(shift) * sinh(u)/u`` without overflow for large |Re u|."""
    u = np.asarray(u, dtype=complex)
    # branch with Re(u) >= 0 (both functions are even in u)
    u = np.where(u.real < 0, -u, u)
    big = u.real > 20.0
    if not np.any(big):
        ch, shc = _cosh_shc(u)
        return ch * np.exp(shift), shc * np.exp(shift)
    e = np.exp(shift + u)  # dominant growth
    em = np.exp(shift - u)
    ch_big = 0.5 * (e + em)
    shc_big = 0.5 * (e - em) / np.where(u == 0, 1.0, u)
    ch, shc = _cosh_shc(np.where(big, 0.0, u))
    return (
        np.where(big, ch_big, ch * np.exp(shift)),
        np.where(big, shc_big, shc * np.exp(shift)),
    )


def _transfer(z, y, k, length):
    """Transfer entries of d/dx [x, f] = [[-k, -z], [-y, 0]] [x, f] over ``length``."""
    s = np.sqrt(k * k + 4 * z * y + 0j)
    half = 0.5 * length
    ch, shc = _cosh_shc_scaled(s * half, -k * half)
    shc = shc * length  # exp(-k l/2) sinh(s l/2)/(s/2)
    A = ch - 0.5 * k * shc
    D = ch + 0.5 * k * shc
    B = -z * shc
    C = -y * shc
    return A, B, C, D


def gas_two_port(line: GasLine, omega: float, length: float) -> TwoPort:
    """Transfer matrix of a gas pipe from inlet (p, m) to outlet (p, m).

    At ``omega == 0`` this is the steady solution of dm/dx = 0,
    dp/dx = -R m - K p (closed form, including K != 0).
    """
    if not length > 0:
        raise ValueError("pipe length must be positive")
    if omega < 0:
        raise ValueError("angular frequency must be non-negative")
    if omega == 0:
        return _gas_steady(line, length)
    z = line.R + 1j * omega * line.L
    y = 1j * omega * line.C
    A, B, C, D = _transfer(z, y, line.K, length)
    return TwoPort(complex(A), complex(B), complex(C), complex(D), float(omega))


def _gas_steady(line: GasLine, length: float) -> TwoPort:
    kl = line.K * length
    decay = np.exp(-kl)
    # (1 - exp(-K l)) / K, with the K -> 0 limit l
    if abs(kl) < _SERIES_CUTOFF:
        span = length * (1 - kl / 2 + kl * kl / 6)
    else:
        span = -np.expm1(-kl) / line.K
    return TwoPort(complex(decay), complex(-line.R * span), 0j, 1 + 0j, 0.0)


def gas_two_ports(line: GasLine, omegas, length: float) -> np.ndarray:
    """Vectorised transfer entries, shape (len(omegas), 4) as (A, B, C, D)."""
    omegas = np.asarray(omegas, dtype=float)
    out = np.empty((omegas.size, 4), dtype=complex)
    for i, w in enumerate(omegas):
        tp = gas_two_port(line, float(w), length)
        out[i] = (tp.A, tp.B, tp.C, tp.D)
    return out


def heat_propagation(line: HeatLine, omega: float) -> complex:
    """Propagation constant with Re >= 0 (equals ``c_p m (R + j w L)`` exactly)."""
    z = line.R + 1j * omega * line.L
    y = line.G + 1j * omega * line.C
    gamma = np.sqrt(z * y + 0j)
    if gamma.real < 0 or (gamma.real == 0 and gamma.imag < 0):
        gamma = -gamma
    return complex(gamma)


def heat_characteristic_impedance(line: HeatLine, omega: float) -> complex:
    z = line.R + 1j * omega * line.L
    y = line.G + 1j * omega * line.C
    if y == 0:
        # lossless pipe at DC: 0/0, take the ratio of the reactive parts
        return complex(np.sqrt(line.L / line.C))
    zc = np.sqrt(z / y + 0j)
    return complex(zc if zc.real >= 0 else -zc)


def heat_two_port(line: HeatLine, omega: float, length: float) -> TwoPort:
    """Reciprocal transfer matrix from inlet (T, h) to outlet (T, h)."""
    if not length > 0:
        raise ValueError("pipe length must be positive")
    if omega < 0:
        raise ValueError("angular frequency must be non-negative")
    z = line.R + 1j * omega * line.L
    y = line.G + 1j * omega * line.C
    A, B, C, D = _transfer(z, y, 0.0, length)
    A = complex(A)
    return TwoPort(A, complex(B), complex(C), A, float(omega))


def heat_transmission_factor(line: HeatLine, omega: float, length: float) -> complex:
    """Outlet/inlet heat-flow ratio ``exp(-gamma l)``; |phi| <= 1."""
    return complex(np.exp(-heat_propagation(line, omega) * length))


def heat_transmission_factors(pipe: HeatPipe, omegas) -> np.ndarray:
    """Closed form ``exp(-(mu/(c_p m) + j w rho S/m) l)`` for many frequencies."""
    omegas = np.asarray(omegas, dtype=float)
    att = pipe.loss / (pipe.specific_heat * pipe.mass_flow)
    delay = pipe.density * pipe.area / pipe.mass_flow
    return np.exp(-(att + 1j * omegas * delay) * pipe.length)


def gas_lumped(tp: TwoPort) -> LumpedPi:
    if tp.B == 0:
        raise ValueError("degenerate two-port (B == 0): zero-length or frictionless DC pipe")
    det = tp.det
    return LumpedPi(Z=-tp.B, K=1 - det, Y1=(det - tp.A) / tp.B, Y2=(1 - tp.D) / tp.B)


def heat_lumped(tp: TwoPort) -> LumpedPi:
    if tp.B == 0:
        raise ValueError("degenerate two-port (B == 0)")
    # (1 - A)/B rewritten via A^2 - BC = 1; no cancellation when A ~ 1
    y = -tp.C / (1 + tp.A)
    return LumpedPi(Z=-tp.B, K=0j, Y1=y, Y2=y)

