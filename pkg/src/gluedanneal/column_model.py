"""Column-subspace representation of the glued-trees annealing Hamiltonian.

The (2n+2)-dimensional span of the column states is invariant under the
adjacency oracle and the two projectors, so the whole anneal can be carried
out on a symmetric tridiagonal matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT2 = np.sqrt(2.0)
DEFAULT_ALPHA = 1.0 / np.sqrt(8.0)


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    return alpha


def check_s(s: float) -> float:
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    return s


def column_sizes(n: int) -> np.ndarray:
    """Number of vertices in each column, ``N_j`` for ``j = 0..2n+1``."""
    j = np.arange(2 * n + 2)
    return np.where(j <= n, 2.0**j, 2.0 ** (2 * n + 1 - j))


def vertex_count(n: int) -> int:
    return 2 ** (n + 2) - 2


@dataclass(frozen=True)
class TridiagonalHamiltonian:
    """H(s) restricted to the column basis, stored as (diag, off)."""

    n: int
    alpha: float
    s: float
    diag: np.ndarray
    off: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.n + 2

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.off * x[1:]
        y[1:] += self.off * x[:-1]
        return y

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def reversed(self) -> "TridiagonalHamiltonian":
        """Index-reversed copy, j -> 2n+1-j."""
        return TridiagonalHamiltonian(
            self.n, self.alpha, self.s, self.diag[::-1].copy(), self.off[::-1].copy()
        )


def tridiagonal_arrays(n: int, alpha: float, s: float) -> tuple[np.ndarray, np.ndarray]:
    diag = np.zeros(2 * n + 2)
    diag[0] = -(1.0 - s) * alpha
    diag[-1] = -s * alpha
    off = np.full(2 * n + 1, -s * (1.0 - s))
    off[n] *= SQRT2
    return diag, off


def column_hamiltonian(n: int, alpha: float, s: float) -> TridiagonalHamiltonian:
    """Build ``(1-s) alpha H0 - s(1-s) A + s alpha H1`` in the column basis."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    alpha = check_alpha(alpha)
    s = check_s(s)
    diag, off = tridiagonal_arrays(n, alpha, s)
    return TridiagonalHamiltonian(n, alpha, s, diag, off)


@dataclass(frozen=True)
class ColumnState:
    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        if self.amplitudes.shape != (2 * self.n + 2,):
            raise ValueError("amplitude vector must have length 2n+2")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"column state is not normalized (norm={norm})")

    def overlap2(self, other: np.ndarray) -> float:
        return float(abs(np.vdot(other, self.amplitudes)) ** 2)


def uniform_state(n: int) -> ColumnState:
    """Uniform superposition over every vertex name, written in columns."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    amps = np.sqrt(column_sizes(n) / vertex_count(n))
    return ColumnState(amps.astype(complex), n)


def basis_state(n: int, j: int) -> ColumnState:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= j <= 2 * n + 1:
        raise IndexError(f"column index {j} outside 0..{2 * n + 1}")
    amps = np.zeros(2 * n + 2, dtype=complex)
    amps[j] = 1.0
    return ColumnState(amps, n)


def u_eigenvalue(s: float) -> float:
    return -s * (1.0 - s) * 3.0 / SQRT2


def u_residual(n: int, alpha: float, s: float) -> float:
    """``||H(s)|u> - G(s)|u>||`` with ``G(s) = -s(1-s) 3/sqrt(2)``.

    Only the two end rows contribute, so the value decays like ``2^(-n/2)``.
    """
    H = column_hamiltonian(n, alpha, s)
    u = uniform_state(n).amplitudes.real
    return float(np.linalg.norm(H.matvec(u) - u_eigenvalue(s) * u))
