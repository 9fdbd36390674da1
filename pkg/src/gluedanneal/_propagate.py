"""Compiled kernels for time-ordered propagation in the column basis.

Each step applies exact exponentials of tridiagonal Hamiltonians frozen at
fixed times.  The exponential itself is a Chebyshev expansion carried to
double-precision convergence, so its cost grows with ``dt * ||H||`` but never
with the number of knots in the schedule.
"""
from __future__ import annotations

import math

import numba
import numpy as np

SQRT3_6 = math.sqrt(3.0) / 6.0
# two-exponential commutator-free scheme of order 4 (Gauss nodes c1 < c2)
CF4_A = 0.25 + SQRT3_6
CF4_B = 0.25 - SQRT3_6
METHODS = {"midpoint": 0, "cf4": 1}


@numba.njit(cache=True)
def bessel_sequence(x, kmax):
    """J_0(x) .. J_kmax(x) by Miller's backward recurrence (x >= 0)."""
    out = np.zeros(kmax + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    start = kmax + 20 + int(math.sqrt(40.0 * (kmax + 20)))
    if start % 2 == 1:
        start += 1
    fp1 = 0.0
    f = 1e-300
    norm = 0.0
    for k in range(start, 0, -1):
        fm1 = 2.0 * k / x * f - fp1
        fp1 = f
        f = fm1
        if k - 1 <= kmax:
            out[k - 1] = f
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * f
        if abs(f) > 1e250:
            f *= 1e-250
            fp1 *= 1e-250
            norm *= 1e-250
            for i in range(kmax + 1):
                out[i] *= 1e-250
    norm += f  # J_0 term
    for i in range(kmax + 1):
        out[i] /= norm
    return out


@numba.njit(cache=True)
def _tri_matvec(d, o, x, out, shift, scale):
    m = d.shape[0]
    for j in range(m):
        v = (d[j] - shift) * x[j]
        if j > 0:
            v += o[j - 1] * x[j - 1]
        if j < m - 1:
            v += o[j] * x[j + 1]
        out[j] = v * scale


@numba.njit(cache=True)
def expm_tridiag(d, o, dt, psi):
    """Return ``exp(-i dt H) psi`` for tridiagonal real symmetric ``H = (d, o)``."""
    m = d.shape[0]
    lo = np.inf
    hi = -np.inf
    for j in range(m):
        r = 0.0
        if j > 0:
            r += abs(o[j - 1])
        if j < m - 1:
            r += abs(o[j])
        lo = min(lo, d[j] - r)
        hi = max(hi, d[j] + r)
    center = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo) + 1e-300
    x = dt * half
    kmax = int(x + 10.0 * x ** (1.0 / 3.0) + 40.0)
    jk = bessel_sequence(x, kmax)

    prev = psi.copy()
    cur = np.empty_like(psi)
    _tri_matvec(d, o, prev, cur, center, 1.0 / half)
    acc = jk[0] * prev + 2.0 * (-1j) * jk[1] * cur
    nxt = np.empty_like(psi)
    phase = -1j
    for k in range(2, kmax + 1):
        _tri_matvec(d, o, cur, nxt, center, 2.0 / half)
        for j in range(m):
            nxt[j] -= prev[j]
        phase *= -1j
        c = 2.0 * phase * jk[k]
        for j in range(m):
            acc[j] += c * nxt[j]
        prev, cur, nxt = cur, nxt, prev
        if k > x and abs(jk[k]) < 1e-18:
            break
    return acc * np.exp(-1j * dt * center)


@numba.njit(cache=True)
def _fill_h(n, alpha, s, d, o):
    m = 2 * n + 2
    for j in range(m):
        d[j] = 0.0
    d[0] = -(1.0 - s) * alpha
    d[m - 1] = -s * alpha
    w = -s * (1.0 - s)
    for j in range(m - 1):
        o[j] = w
    o[n] = w * math.sqrt(2.0)


@numba.njit(cache=True)
def propagate(n, alpha, knots_t, knots_s, breaks, piece_steps, record, psi0, method):
    """Evolve ``psi0`` across consecutive ``breaks``.

    Piece ``i`` (``breaks[i]`` to ``breaks[i+1]``) is cut into
    ``piece_steps[i]`` equal steps; knots of the schedule should be among the
    breaks so every step sees a smooth H(t).  Returns the state at every break
    flagged in ``record``.
    """
    m = 2 * n + 2
    count = 0
    for i in range(record.shape[0]):
        if record[i]:
            count += 1
    out = np.empty((count, m), dtype=np.complex128)
    psi = psi0.copy()
    row = 0
    if record[0]:
        out[0] = psi
        row = 1
    d1 = np.empty(m)
    o1 = np.empty(m - 1)
    d2 = np.empty(m)
    o2 = np.empty(m - 1)
    dc = np.empty(m)
    oc = np.empty(m - 1)
    for i in range(breaks.shape[0] - 1):
        t0 = breaks[i]
        h = (breaks[i + 1] - t0) / piece_steps[i]
        for step in range(piece_steps[i]):
            t = t0 + step * h
            if method == 0:
                s = np.interp(t + 0.5 * h, knots_t, knots_s)
                _fill_h(n, alpha, s, d1, o1)
                psi = expm_tridiag(d1, o1, h, psi)
            else:
                sa = np.interp(t + (0.5 - SQRT3_6) * h, knots_t, knots_s)
                sb = np.interp(t + (0.5 + SQRT3_6) * h, knots_t, knots_s)
                _fill_h(n, alpha, sa, d1, o1)
                _fill_h(n, alpha, sb, d2, o2)
                # earlier node weighted more in the factor applied first
                for j in range(m):
                    dc[j] = CF4_A * d1[j] + CF4_B * d2[j]
                for j in range(m - 1):
                    oc[j] = CF4_A * o1[j] + CF4_B * o2[j]
                psi = expm_tridiag(dc, oc, h, psi)
                for j in range(m):
                    dc[j] = CF4_B * d1[j] + CF4_A * d2[j]
                for j in range(m - 1):
                    oc[j] = CF4_B * o1[j] + CF4_A * o2[j]
                psi = expm_tridiag(dc, oc, h, psi)
        if record[i + 1]:
            out[row] = psi
            row += 1
    return out
