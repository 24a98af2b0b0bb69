"""Hot numeric kernels, each with an ``@njit`` body and a numpy twin.

The public names dispatch on :data:`ecmoef._accel.USE_NUMBA`; the ``*_numpy``
and ``*_numba`` variants stay importable for cross-checks and benchmarks.
"""

import numpy as np
from scipy.signal import lfilter

from ._accel import USE_NUMBA, njit

# ------------------------------------------------------------ upwind sweep


@njit(cache=True)
def _upwind_sweep_numba(prev, head, courant, decay):
    n = prev.shape[0]
    out = np.empty(n)
    out[0] = head
    denom = 1.0 + courant + decay
    for i in range(1, n):
        out[i] = (prev[i] + courant * out[i - 1]) / denom
    return out


def _upwind_sweep_numpy(prev, head, courant, decay):
    # T_i = a T_{i-1} + g prev_i is a first-order recursive filter
    denom = 1.0 + courant + decay
    a, g = courant / denom, 1.0 / denom
    out = np.empty_like(prev, dtype=float)
    out[0] = head
    if prev.shape[0] > 1:
        out[1:], _ = lfilter([g], [1.0, -a], prev[1:], zi=[a * head])
    return out


def upwind_sweep_numba(prev, head, courant, decay):
    return _upwind_sweep_numba(np.ascontiguousarray(prev, dtype=np.float64), float(head), float(courant), float(decay))


upwind_sweep_numpy = _upwind_sweep_numpy


def upwind_sweep(prev, head, courant, decay):
    """One implicit-Euler upwind step of ``dT/dt + v dT/dx + b T = 0`` along a pipe.

    ``prev`` holds the mesh temperatures at the old time level, ``head`` the
    new inlet value, ``courant = v dt/dx`` and ``decay = b dt``.
    """
    if USE_NUMBA:
        return upwind_sweep_numba(prev, head, courant, decay)
    return _upwind_sweep_numpy(np.asarray(prev, float), head, courant, decay)


# --------------------------------------------------------- gas box stencil


@njit(cache=True)
def _gas_stencil_numba(n_seg, offsets, dx, R, L, C, K, dt):
    # per pipe: 2 n_seg rows, 8 entries each for the new level, 4 for the old
    total = 0
    for k in range(n_seg.shape[0]):
        total += n_seg[k]
    rn = np.empty(16 * total, np.int64)
    cn = np.empty(16 * total, np.int64)
    vn = np.empty(16 * total)
    ro = np.empty(8 * total, np.int64)
    co = np.empty(8 * total, np.int64)
    vo = np.empty(8 * total)
    e = 0
    f = 0
    row = 0
    for k in range(n_seg.shape[0]):
        n = n_seg[k]
        base = offsets[k]
        np1 = n + 1
        for i in range(n):
            pi = base + i
            pj = base + i + 1
            mi = base + np1 + i
            mj = base + np1 + i + 1
            # momentum: (p_j - p_i)/dx + L (mbar' - mbar)/dt + R mbar' + K pbar' = 0
            a_m = 0.5 * (L[k] / dt + R[k])
            a_p = 0.5 * K[k]
            rn[e] = row; cn[e] = pj; vn[e] = 1.0 / dx[k] + a_p; e += 1
            rn[e] = row; cn[e] = pi; vn[e] = -1.0 / dx[k] + a_p; e += 1
            rn[e] = row; cn[e] = mi; vn[e] = a_m; e += 1
            rn[e] = row; cn[e] = mj; vn[e] = a_m; e += 1
            ro[f] = row; co[f] = mi; vo[f] = 0.5 * L[k] / dt; f += 1
            ro[f] = row; co[f] = mj; vo[f] = 0.5 * L[k] / dt; f += 1
            row += 1
            # continuity: (m_j - m_i)/dx + C (pbar' - pbar)/dt = 0
            c_p = 0.5 * C[k] / dt
            rn[e] = row; cn[e] = mj; vn[e] = 1.0 / dx[k]; e += 1
            rn[e] = row; cn[e] = mi; vn[e] = -1.0 / dx[k]; e += 1
            rn[e] = row; cn[e] = pi; vn[e] = c_p; e += 1
            rn[e] = row; cn[e] = pj; vn[e] = c_p; e += 1
            ro[f] = row; co[f] = pi; vo[f] = c_p; f += 1
            ro[f] = row; co[f] = pj; vo[f] = c_p; f += 1
            row += 1
    return rn[:e], cn[:e], vn[:e], ro[:f], co[:f], vo[:f]


def _gas_stencil_numpy(n_seg, offsets, dx, R, L, C, K, dt):
    n_seg = np.asarray(n_seg, np.int64)
    pipe = np.repeat(np.arange(n_seg.size), n_seg)
    i = np.arange(pipe.size) - np.repeat(np.cumsum(n_seg) - n_seg, n_seg)
    base = np.asarray(offsets)[pipe]
    np1 = n_seg[pipe] + 1
    pi, pj = base + i, base + i + 1
    mi, mj = base + np1 + i, base + np1 + i + 1
    rm = 2 * np.arange(pipe.size)
    rc = rm + 1
    dxp, Rp, Lp, Cp, Kp = (np.asarray(a, float)[pipe] for a in (dx, R, L, C, K))
    a_m = 0.5 * (Lp / dt + Rp)
    a_p = 0.5 * Kp
    c_p = 0.5 * Cp / dt
    rn = np.stack([rm, rm, rm, rm, rc, rc, rc, rc], axis=1).ravel()
    cn = np.stack([pj, pi, mi, mj, mj, mi, pi, pj], axis=1).ravel()
    vn = np.stack([1 / dxp + a_p, -1 / dxp + a_p, a_m, a_m, 1 / dxp, -1 / dxp, c_p, c_p], axis=1).ravel()
    ro = np.stack([rm, rm, rc, rc], axis=1).ravel()
    co = np.stack([mi, mj, pi, pj], axis=1).ravel()
    vo = np.stack([0.5 * Lp / dt, 0.5 * Lp / dt, c_p, c_p], axis=1).ravel()
    return rn, cn, vn, ro, co, vo


def gas_stencil_numba(n_seg, offsets, dx, R, L, C, K, dt):
    arr = lambda a, t=np.float64: np.ascontiguousarray(a, dtype=t)
    return _gas_stencil_numba(arr(n_seg, np.int64), arr(offsets, np.int64), arr(dx), arr(R), arr(L), arr(C), arr(K), float(dt))


gas_stencil_numpy = _gas_stencil_numpy


def gas_stencil(n_seg, offsets, dx, R, L, C, K, dt):
    """COO triplets of the box-scheme rows for every pipe segment.

    Pipe ``k`` owns the state slice ``offsets[k] : offsets[k] + 2 (n_seg[k]+1)``
    laid out as pressures then mass flows. Returns ``(rows, cols, vals)`` for
    the new time level and for the old level (moved to the right-hand side);
    row ``2 s`` is the momentum and ``2 s + 1`` the continuity equation of
    global segment ``s``.
    """
    if USE_NUMBA:
        return gas_stencil_numba(n_seg, offsets, dx, R, L, C, K, dt)
    return _gas_stencil_numpy(n_seg, offsets, dx, R, L, C, K, dt)


# ----------------------------------------------------- projected row tensor


@njit(cache=True)
def _projection_numba(W, Zsel):
    n_tau, n_f = W.shape
    _, n_i, n_d = Zsel.shape
    re = np.empty((n_i, n_tau, n_f, n_d))
    im = np.empty((n_i, n_tau, n_f, n_d))
    for i in range(n_i):
        for t in range(n_tau):
            for k in range(n_f):
                w = W[t, k]
                for d in range(n_d):
                    g = w * Zsel[k, i, d]
                    re[i, t, k, d] = g.real
                    im[i, t, k, d] = -g.imag
    return re, im


def _projection_numpy(W, Zsel):
    G = np.einsum("tk,kid->itkd", W, Zsel)
    return G.real.copy(), -G.imag


def projection_numba(W, Zsel):
    return _projection_numba(np.ascontiguousarray(W, np.complex128), np.ascontiguousarray(Zsel, np.complex128))


projection_numpy = _projection_numpy


def projection(W, Zsel):
    """Real coefficients of ``Re(sum_k W[t,k] Zsel[k,i,d] c[k,d])`` on (Re c, Im c).

    ``W`` holds synthesis weights (taus x freqs) and ``Zsel`` the impedance
    columns of each device's node (freqs x monitored nodes x devices, already
    signed). Returns two arrays of shape (nodes, taus, freqs, devices).
    """
    if USE_NUMBA:
        return projection_numba(W, Zsel)
    return _projection_numpy(np.asarray(W, complex), np.asarray(Zsel, complex))
