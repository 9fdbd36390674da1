"""Low-lying spectrum of H(s): numerical eigenpairs and the quantization condition.

Two independent routes to the same eigenvalues live here.  ``eigen_low`` is a
plain tridiagonal eigensolver.  ``solve_quantization`` instead finds the
momenta ``p`` (real, band states) or ``q`` (``p = -iq``, edge-bound states) of
the plane-wave ansatz, which satisfy ``f(p, n, a') f(p, n, b') = 2`` with
``a' = alpha/s`` and ``b' = alpha/(1-s)``; the eigenvalue is then
``-2 s(1-s) cos p``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import mpmath
import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar

from .column_model import (
    SQRT2,
    TridiagonalHamiltonian,
    check_alpha,
    column_hamiltonian,
)

RESIDUAL_TOL = 1e-10
ROOT_RESIDUAL_TOL = 1e-9
SINGULAR_TOL = 1e-14


class SpectralError(RuntimeError):
    """Eigensolver output failed its accuracy contract."""


class QuantizationSingularity(ZeroDivisionError):
    """``f_quant`` evaluated on (or numerically at) one of its poles."""


class DegenerateAnsatz(ValueError):
    """The ansatz coefficients cannot be fixed for this root."""


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray
    index: int


def fix_sign(v: np.ndarray) -> np.ndarray:
    """Make the first largest-magnitude component positive."""
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def eigen_low(H: TridiagonalHamiltonian, k: int) -> list[EigenPair]:
    """The ``k`` lowest eigenpairs of a tridiagonal Hamiltonian.

    Bisection for the eigenvalues, inverse iteration for the vectors (LAPACK
    ``stebz``/``stein``).  Residuals and orthogonality are checked and a
    violation raises :class:`SpectralError` instead of returning bad pairs.
    """
    dim = H.dim
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in 1..{dim}, got {k}")
    try:
        w, v = eigh_tridiagonal(H.diag, H.off, select="i", select_range=(0, k - 1))
    except LinAlgError as exc:
        raise SpectralError(str(exc)) from exc
    pairs = []
    for i in range(k):
        vec = fix_sign(v[:, i])
        res = np.linalg.norm(H.matvec(vec) - w[i] * vec)
        if not res <= RESIDUAL_TOL:
            raise SpectralError(f"eigenpair {i} residual {res:.3e} exceeds {RESIDUAL_TOL}")
        pairs.append(EigenPair(float(w[i]), vec, i))
    if k > 1:
        gram = v.T @ v - np.eye(k)
        if np.max(np.abs(gram)) > RESIDUAL_TOL:
            raise SpectralError("eigenvectors are not orthonormal to 1e-10")
    return pairs


# ---------------------------------------------------------------- quantization


def _hyperbolic_f(q: float, n: int, theta: float) -> float:
    if abs(q) * (n + 2) < 600.0:
        big = math.sinh((n + 1) * q)
        num = math.sinh((n + 2) * q) - theta * big
        den = big - theta * math.sinh(n * q)
        size = abs(big) + abs(theta * math.sinh(n * q))
    else:
        # numerator and denominator divided by exp(n|q|)/2
        sgn = 1.0 if q > 0 else -1.0
        a = abs(q)
        big = math.exp(a) * -math.expm1(-2 * (n + 1) * a)
        small = theta * -math.expm1(-2 * n * a)
        num = sgn * (math.exp(2 * a) * -math.expm1(-2 * (n + 2) * a) - theta * big)
        den = sgn * (big - small)
        size = abs(big) + abs(small)
    if abs(den) <= SINGULAR_TOL * max(1.0, size):
        raise QuantizationSingularity(f"f_h is singular at q={q}")
    return num / den


def f_quant(p: complex, n: int, theta: float) -> float:
    """``[sin((n+2)p) - theta sin((n+1)p)] / [sin((n+1)p) - theta sin(np)]``.

    ``p`` must be purely real or purely imaginary; for ``p = -iq`` the
    hyperbolic form (sin -> sinh) is evaluated, which is real.
    """
    p = complex(p)
    if p.imag == 0.0:
        x = p.real
        num = math.sin((n + 2) * x) - theta * math.sin((n + 1) * x)
        den = math.sin((n + 1) * x) - theta * math.sin(n * x)
        if abs(den) <= SINGULAR_TOL:
            raise QuantizationSingularity(f"f is singular at p={x}")
        return num / den
    if p.real == 0.0:
        return _hyperbolic_f(-p.imag, n, theta)
    raise ValueError("p must be purely real or purely imaginary")


def _chebyshev_tail(c: np.ndarray, mu: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``U_{n-1}, U_n, U_{n+1}`` at ``c``, each scaled by ``mu^-j``.

    ``U_j(cos p) = sin((j+1)p)/sin p``.  The ``mu^-j`` factor (``mu = e^q`` on
    the hyperbolic branch) keeps values bounded without changing signs or zeros.
    """
    prev = np.zeros_like(c)
    cur = np.ones_like(c)
    inv = 1.0 / mu
    for _ in range(n - 1):
        prev, cur = cur, (2.0 * c * cur - prev * inv) * inv
    nxt = (2.0 * c * cur - prev * inv) * inv
    return cur, nxt, (2.0 * c * nxt - cur * inv) * inv


def _condition_terms(c, mu, n, a1, b1):
    """Both sides of ``g^a_{n+1} g^b_{n+1} = 2 g^a_n g^b_n`` and their sizes.

    ``g^t_j = U_j - t U_{j-1}`` is the left-edge solution divided by sin p,
    so the equation is the quantization condition with its poles cleared and
    without the spurious zero at p = 0.
    """
    u_m, u_n, u_p = _chebyshev_tail(c, mu, n)
    inv = 1.0 / mu

    def g(t, hi, lo):
        return hi - t * lo * inv, np.abs(hi) + t * np.abs(lo) * inv

    ga_n, sa_n = g(a1, u_n, u_m)
    ga_p, sa_p = g(a1, u_p, u_n)
    gb_n, sb_n = g(b1, u_n, u_m)
    gb_p, sb_p = g(b1, u_p, u_n)
    w = 2.0 * inv * inv
    return ga_p * gb_p, w * ga_n * gb_n, sa_p * sb_p + w * sa_n * sb_n


def _cleared_condition(c, mu, n, a1, b1):
    top, bottom, _ = _condition_terms(c, mu, n, a1, b1)
    return top - bottom


def _root_residual(z: float, n: int, a1: float, b1: float, hyperbolic: bool) -> float:
    """Residual of the cleared condition relative to the size of its terms.

    Edge-bound roots sit next to a pole of one factor, where the raw product
    ``f f`` cannot be evaluated to better than its condition number.
    """
    z = np.array([z])
    c, mu = (np.cosh(z), np.exp(z)) if hyperbolic else (np.cos(z), np.ones(1))
    top, bottom, size = _condition_terms(c, mu, n, a1, b1)
    return float(abs(top - bottom)[0] / size[0])


@dataclass(frozen=True)
class QuantizationRoot:
    """One solution of the quantization condition.

    ``p`` is the real momentum on the goniometric branch and ``q`` (with
    ``p = -iq``) on the hyperbolic branch.  ``k`` and ``x`` are only set for
    goniometric roots, from ``p = k pi/(n+1) + pi x/(n+1)^2``.
    """

    branch: Literal["hyperbolic", "goniometric"]
    p: float
    lambda_: float
    residual: float
    s: float
    k: int | None = None
    x: float | None = None

    @property
    def momentum(self) -> complex:
        return complex(self.p) if self.branch == "goniometric" else complex(0.0, -self.p)


class RootList(list):
    """List of roots with a record of windows where bracketing failed."""

    def __init__(self, roots=(), failures=()):
        super().__init__(roots)
        self.failures: list[tuple[float, float, str]] = list(failures)


def _brackets(fun, lo: float, hi: float, points: int) -> list[tuple[float, float]]:
    grid = np.linspace(lo, hi, points)
    vals = fun(grid)
    out = []
    for i in range(points - 1):
        if vals[i] == 0.0:
            out.append((grid[i], grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            out.append((grid[i], grid[i + 1]))
    # a pair of nearly coincident roots hides between grid points as a dip
    # of |R| that does not change sign; look inside every such dip
    for i in range(1, points - 1):
        if vals[i - 1] * vals[i] <= 0 or vals[i] * vals[i + 1] <= 0:
            continue
        if not (abs(vals[i]) < abs(vals[i - 1]) and abs(vals[i]) <= abs(vals[i + 1])):
            continue
        sgn = np.sign(vals[i])
        res = minimize_scalar(
            lambda z: sgn * fun(np.array([z]))[0],
            bounds=(grid[i - 1], grid[i + 1]),
            method="bounded",
            options={"xatol": 1e-15},
        )
        if res.fun < 0:
            out.append((grid[i - 1], res.x))
            out.append((res.x, grid[i + 1]))
    return sorted(out)


def solve_quantization(
    n: int,
    alpha: float,
    s: float,
    branch: Literal["hyperbolic", "goniometric"],
    k_max: int = 3,
    grid_points: int | None = None,
) -> RootList:
    """Roots of ``f(p, n, alpha/s) f(p, n, alpha/(1-s)) = 2`` on one branch.

    Hyperbolic: every ``q`` in ``(0, q_max)``.  Goniometric: the ``k_max``
    smallest ``p`` in ``(0, pi)``.  Roots are bracketed on a sign-change grid
    of the pole-free form of the condition and refined with Brent's method.
    Roots whose residual misses the tolerance are dropped and their bracket is
    reported in ``RootList.failures``.
    """
    alpha = check_alpha(alpha)
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    a1, b1 = alpha / s, alpha / (1.0 - s)
    scale = 2.0 * s * (1.0 - s)
    points = grid_points or max(4000, 200 * (n + 1))

    if branch == "hyperbolic":
        q_max = math.log(max(a1, b1, 2.0)) + 1.0

        def fun(q):
            q = np.asarray(q, dtype=float)
            return _cleared_condition(np.cosh(q), np.exp(q), n, a1, b1)

        brackets = _brackets(fun, 1e-9, q_max, points)
    elif branch == "goniometric":

        def fun(p):
            p = np.asarray(p, dtype=float)
            return _cleared_condition(np.cos(p), np.ones_like(p), n, a1, b1)

        brackets = _brackets(fun, 1e-9, math.pi - 1e-9, points)
    else:
        raise ValueError(f"unknown branch {branch!r}")

    roots, failures = [], []
    for lo, hi in brackets:
        z = lo if lo == hi else brentq(lambda t: fun(np.array([t]))[0], lo, hi, xtol=1e-15, maxiter=200)
        if branch == "hyperbolic":
            mom = complex(0.0, -z)
            lam = -scale * math.cosh(z)
            k = x = None
        else:
            mom = complex(z)
            lam = -scale * math.cos(z)
            k = max(1, int(round(z * (n + 1) / math.pi)))
            x = (z * (n + 1) / math.pi - k) * (n + 1)
        res = _root_residual(z, n, a1, b1, branch == "hyperbolic")
        if res > ROOT_RESIDUAL_TOL:
            failures.append((lo, hi, f"residual {res:.2e}"))
            continue
        roots.append(QuantizationRoot(branch, float(z), float(lam), float(res), float(s), k, x))
        if branch == "goniometric" and len(roots) == k_max:
            break
    return RootList(roots, failures)


def _working_dps(root: QuantizationRoot, n: int) -> int:
    # bound-state tails span exp(+-2(n+2)q); carry enough digits to resolve them
    q = root.p if root.branch == "hyperbolic" else 0.0
    return 30 + int(math.ceil(2 * (n + 2) * q / math.log(10)))


def _mp_solution(root: QuantizationRoot, n: int, alpha: float):
    """Polish ``root`` in extended precision and return the edge profiles.

    Returns ``(z, a1, b1, g, h, ratio)`` as mpmath numbers, where ``g`` and
    ``h`` are the ENTRANCE/EXIT-side profiles ``S((j+1)z) - t S(jz)`` for
    ``j = 0..n+1`` (``S`` = sin or sinh) and ``ratio`` scales ``h`` so that
    both junction equations hold.
    """
    hyperbolic = root.branch == "hyperbolic"
    S = mpmath.sinh if hyperbolic else mpmath.sin
    a1 = mpmath.mpf(alpha) / mpmath.mpf(root.s)
    b1 = mpmath.mpf(alpha) / (1 - mpmath.mpf(root.s))

    def condition(z):
        ga = (S((n + 1) * z) - a1 * S(n * z), S((n + 2) * z) - a1 * S((n + 1) * z))
        gb = (S((n + 1) * z) - b1 * S(n * z), S((n + 2) * z) - b1 * S((n + 1) * z))
        return ga[1] * gb[1] - 2 * ga[0] * gb[0]

    z0 = mpmath.mpf(root.p)
    z = mpmath.findroot(condition, z0, solver="newton", verify=False)
    if abs(z - z0) > 1e-8 * max(1.0, abs(root.p)):
        raise DegenerateAnsatz(f"root polish wandered from {root.p} to {float(z)}")
    if abs(S(z)) < 1e-12:
        raise DegenerateAnsatz("root sits at p = 0 or pi; plane waves are degenerate")
    g = [S((j + 1) * z) - a1 * S(j * z) for j in range(n + 2)]
    h = [S((j + 1) * z) - b1 * S(j * z) for j in range(n + 2)]
    tiny = mpmath.mpf(10) ** (-(mpmath.mp.dps // 2))
    if max(abs(h[n]), abs(h[n + 1])) < tiny:
        raise DegenerateAnsatz("junction conditions do not fix the EXIT-side amplitude")
    if abs(h[n]) >= abs(h[n + 1]):
        ratio = g[n + 1] / (mpmath.sqrt(2) * h[n])
    else:
        ratio = mpmath.sqrt(2) * g[n] / h[n + 1]
    return z, a1, b1, g, h, ratio


def ansatz_coefficients(root: QuantizationRoot, n: int, alpha: float) -> tuple[complex, complex, complex, complex]:
    """Coefficients ``(a, b, c, d)`` of ``gamma_j = a e^{ipj} + b e^{-ipj}`` (and mirror).

    ``a, b`` solve the ENTRANCE condition ``alpha'(a+b) = a e^{-ip} + b e^{ip}``,
    ``c, d`` the EXIT one, and their relative weight follows from the
    junction equations between columns n and n+1.  Overall normalization is
    arbitrary.
    """
    alpha = check_alpha(alpha)
    with mpmath.workdps(_working_dps(root, n)):
        z, a1, b1, _, _, ratio = _mp_solution(root, n, alpha)
        if root.branch == "hyperbolic":
            # p = -iq, so e^{ip} = e^{q}; profile is sinh, i.e. i sin(p) up to sign
            e, unit = mpmath.exp(z), 2
        else:
            e, unit = mpmath.expj(z), 2j
        a, b = (e - a1) / unit, -(1 / e - a1) / unit
        c, d = ratio * (e - b1) / unit, -ratio * (1 / e - b1) / unit
        return tuple(complex(x) for x in (a, b, c, d))


def ansatz_vector(root: QuantizationRoot, n: int, alpha: float, s: float | None = None) -> EigenPair:
    """Normalized column-basis eigenvector built from the ansatz for ``root``.

    The ENTRANCE half is ``sin((j+1)p) - alpha' sin(jp)`` (``sinh`` on the
    hyperbolic branch), the EXIT half the mirror expression in ``beta'``,
    scaled to satisfy the junction equations.  Edge-bound states need their
    tiny tail amplitude at the junction to many digits, so the construction
    runs in extended precision.
    """
    alpha = check_alpha(alpha)
    if s is not None and abs(s - root.s) > 1e-15:
        raise ValueError("root was computed at a different s")
    with mpmath.workdps(_working_dps(root, n)):
        _, _, _, g, h, ratio = _mp_solution(root, n, alpha)
        vec = g[: n + 1] + [ratio * x for x in h[: n + 1]][::-1]
        norm = mpmath.sqrt(mpmath.fsum(x * x for x in vec))
        out = np.array([float(x / norm) for x in vec])
    return EigenPair(root.lambda_, fix_sign(out), -1)


def all_roots(n: int, alpha: float, s: float, k_max: int = 3) -> list[QuantizationRoot]:
    """Hyperbolic roots plus the lowest goniometric ones, sorted by eigenvalue."""
    roots = list(solve_quantization(n, alpha, s, "hyperbolic"))
    roots += list(solve_quantization(n, alpha, s, "goniometric", k_max=k_max))
    return sorted(roots, key=lambda r: r.lambda_)


# ------------------------------------------------------------ closed forms


def analytic_F(alpha: float, s: float) -> float:
    """Entrance-bound level, ``-(1-s)(alpha + s^2/alpha)``."""
    return -(1.0 - s) * (alpha + s * s / alpha)


def analytic_G(s: float) -> float:
    """Level of the near-eigenstate ``|u>``, ``-s(1-s) 3/sqrt(2)``."""
    return -s * (1.0 - s) * 3.0 / SQRT2


def crossing_point(alpha: float) -> float:
    return alpha / SQRT2


def analytic_gap10(alpha: float, s: float) -> float:
    if not 0.0 <= s <= crossing_point(alpha):
        warnings.warn("closed-form gap is only valid for 0 <= s <= s_x", stacklevel=2)
    return -(1.0 - s) * (3.0 * s / SQRT2 - (alpha**2 + s**2) / alpha)


@dataclass(frozen=True)
class GapProfile:
    s_grid: np.ndarray
    delta10: np.ndarray
    delta21: np.ndarray
    n: int
    alpha: float
    lambdas: np.ndarray  # shape (len(s_grid), 3)


def gap_profile(n: int, alpha: float, s_grid: Sequence[float]) -> GapProfile:
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= 0.0) or np.any(s_grid >= 1.0):
        raise ValueError("s grid must lie inside (0, 1)")
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("s grid must be strictly increasing")
    lam = np.empty((len(s_grid), 3))
    for i, s in enumerate(s_grid):
        lam[i] = [e.value for e in eigen_low(column_hamiltonian(n, alpha, s), 3)]
    return GapProfile(
        s_grid=s_grid,
        delta10=np.maximum(lam[:, 1] - lam[:, 0], 0.0),
        delta21=np.maximum(lam[:, 2] - lam[:, 1], 0.0),
        n=n,
        alpha=alpha,
        lambdas=lam,
    )


@dataclass(frozen=True)
class StageBoundaries:
    s1: float
    s2: float
    s3: float
    s4: float
    delta: float
    s_cross: float

    def stage_of(self, s: float) -> int:
        """Stage number 1..5 of ``s`` (V1=[0,s1), ..., V5=[s4,1])."""
        return 1 + int(np.searchsorted([self.s1, self.s2, self.s3, self.s4], s, side="right"))


def stage_boundaries(n: int, alpha: float, kappa: float = 1.0) -> StageBoundaries:
    """``s1,2 = s_x -/+ kappa/n^3`` and their mirror images ``s3 = 1-s2, s4 = 1-s1``."""
    alpha = check_alpha(alpha)
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    sx = crossing_point(alpha)
    delta = kappa / n**3
    s1, s2 = sx - delta, sx + delta
    if not (0.0 < s1 and s2 <= 0.5):
        raise ValueError(f"n={n}, kappa={kappa} gives unordered stage boundaries")
    return StageBoundaries(s1, s2, 1.0 - s2, 1.0 - s1, delta, sx)


def min_gap10(n: int, alpha: float, grid: int = 401) -> tuple[float, float]:
    """``(min Delta10, argmin s)`` over ``(0, 1/2]``.

    A grid search locates the avoided crossing, whose width shrinks like
    ``2^(-n/2)``, and a bounded scalar minimization refines it.
    """
    alpha = check_alpha(alpha)
    s_grid = np.linspace(0.5 / grid, 0.5, grid)
    prof = gap_profile(n, alpha, s_grid)
    i = int(np.argmin(prof.delta10))
    lo, hi = s_grid[max(i - 1, 0)], s_grid[min(i + 1, grid - 1)]

    def gap(s):
        ev = eigen_low(column_hamiltonian(n, alpha, s), 2)
        return ev[1].value - ev[0].value

    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    if res.fun < prof.delta10[i]:
        return float(res.fun), float(res.x)
    return float(prof.delta10[i]), float(s_grid[i])
