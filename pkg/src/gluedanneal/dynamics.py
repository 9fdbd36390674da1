"""Annealing schedules and time-dependent Schrodinger integration.

All column-basis runs go through :func:`evolve`, which doubles the number of
steps until two successive resolutions agree to ``tol`` at every sample.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import _propagate
from .column_model import (
    ColumnState,
    basis_state,
    check_alpha,
    column_hamiltonian,
    uniform_state,
)
from .glued_graph import (
    GluedTreesInstance,
    build_full_hamiltonian,
)
from .spectral import eigen_low, gap_profile, stage_boundaries

log = logging.getLogger(__name__)

RICHARDSON_TOL = 1e-8
NORM_TOL = 1e-9
MAX_STEPS = 50_000_000


class StepUnderflow(RuntimeError):
    """Step refinement did not converge within the step budget."""


@dataclass(frozen=True)
class Schedule:
    """Piecewise-linear, strictly increasing map ``t -> s(t)`` on ``[0, T]``."""

    knots_t: np.ndarray
    knots_s: np.ndarray
    kind: str = "linear"
    epsilon: float | None = None

    def __post_init__(self):
        t, s = np.asarray(self.knots_t, float), np.asarray(self.knots_s, float)
        if t.shape != s.shape or t.size < 2:
            raise ValueError("need at least two (t, s) knots of equal length")
        if t[0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(s) < 0):
            raise ValueError("knots must be strictly increasing in t and monotone in s")
        if s[0] < 0.0 or s[-1] > 1.0:
            raise ValueError("s must stay inside [0, 1]")
        object.__setattr__(self, "knots_t", t)
        object.__setattr__(self, "knots_s", s)

    @property
    def T(self) -> float:
        return float(self.knots_t[-1])

    @property
    def s_start(self) -> float:
        return float(self.knots_s[0])

    @property
    def s_end(self) -> float:
        return float(self.knots_s[-1])

    @property
    def is_full(self) -> bool:
        return self.s_start == 0.0 and self.s_end == 1.0

    def s_of_t(self, t):
        return np.interp(t, self.knots_t, self.knots_s)

    def rate(self, t):
        """Slope ``ds/dt`` of the knot segment containing ``t``."""
        i = np.clip(np.searchsorted(self.knots_t, t, side="right") - 1, 0, len(self.knots_t) - 2)
        return np.diff(self.knots_s)[i] / np.diff(self.knots_t)[i]

    def key(self) -> tuple:
        return (self.kind, self.knots_t.tobytes(), self.knots_s.tobytes())


def linear_segment(s_start: float, s_end: float, rate: float) -> Schedule:
    """Constant-rate schedule from ``s_start`` to ``s_end``."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    if s_end < s_start:
        raise ValueError("segment must run forward in s")
    duration = (s_end - s_start) / rate
    if duration == 0.0:
        return Schedule(np.array([0.0, 1.0]), np.array([s_start, s_start]), "linear", None)
    return Schedule(np.array([0.0, duration]), np.array([s_start, s_end]), "linear", None)


def _gap_knots(n: int, alpha: float, knots: int, kappa: float) -> np.ndarray:
    sb = stage_boundaries(n, alpha, kappa)
    s = np.linspace(0.0, 1.0, knots + 1)
    # resolve the two narrow transfer windows
    win = np.concatenate([np.linspace(sb.s1, sb.s2, 17), np.linspace(sb.s3, sb.s4, 17)])
    s = np.unique(np.concatenate([s, win]))
    # drop near-duplicates left by rounding (e.g. s_x against a grid point)
    return s[np.concatenate([[True], np.diff(s) > 1e-12])]


def make_schedule(
    kind: Literal["linear", "gap_adapted"],
    n: int,
    alpha: float,
    epsilon: float,
    T_override: float | None = None,
    *,
    c_floor: float = 1.0,
    knots: int = 512,
    kappa: float = 1.0,
) -> Schedule:
    """Build an annealing schedule.

    ``linear``: ``s = t/T`` with ``T = n^6/epsilon`` unless overridden.
    ``gap_adapted``: ``ds/dt = epsilon * max(Delta10(s), c_floor/n^3)^2``.  The
    floor means the anneal does not slow down below the 1/n^3 scale inside the
    avoided crossings, which is what makes the two transfers diabatic.
    """
    alpha = check_alpha(alpha)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if kind == "linear":
        T = float(T_override) if T_override is not None else n**6 / epsilon
        if T <= 0:
            raise ValueError("T must be positive")
        return Schedule(np.array([0.0, T]), np.array([0.0, 1.0]), "linear", epsilon)
    if kind in ("gap_adapted", "gap-adapted"):
        s = _gap_knots(n, alpha, knots, kappa)
        inner = s[1:-1]
        prof = gap_profile(n, alpha, inner)
        gap = np.empty_like(s)
        gap[1:-1] = prof.delta10
        gap[0] = gap[-1] = alpha  # H(0), H(1) are diagonal: Delta10 = alpha
        gap = np.maximum(gap, c_floor / n**3)
        dt_ds = 1.0 / (epsilon * gap**2)
        t = np.concatenate([[0.0], np.cumsum(0.5 * (dt_ds[1:] + dt_ds[:-1]) * np.diff(s))])
        sched = Schedule(t, s, "gap_adapted", epsilon)
        if T_override is not None:
            sched = Schedule(t * (T_override / t[-1]), s, "gap_adapted", epsilon)
        return sched
    raise ValueError(f"unknown schedule kind {kind!r}")


# ------------------------------------------------------------------ evolution


@dataclass
class EvolutionResult:
    """Sampled trace of one anneal; arrays are indexed by sample."""

    t: np.ndarray
    s: np.ndarray
    norm: np.ndarray
    p_phi0: np.ndarray
    p_phi1: np.ndarray
    p_u: np.ndarray
    p_entrance: np.ndarray
    p_exit: np.ndarray
    stage: np.ndarray
    final_state: ColumnState
    states: np.ndarray = field(repr=False)
    steps: int = 0
    richardson_deviation: float = 0.0

    COLUMNS = ("t", "s", "norm", "p_phi0", "p_phi1", "p_u", "p_entrance", "p_exit", "stage")

    def rows(self) -> list[tuple]:
        return list(zip(*(getattr(self, c) for c in self.COLUMNS)))


def step_plan(schedule: Schedule, t_samples: np.ndarray, h: float):
    """Break points, record mask and per-piece step counts for step length ``h``.

    Schedule knots become break points so no step straddles a kink in s(t).
    """
    t_samples = np.asarray(t_samples, dtype=float)
    kt = schedule.knots_t
    inside = kt[(kt > t_samples[0]) & (kt < t_samples[-1])]
    breaks = np.unique(np.concatenate([t_samples, inside]))
    record = np.isin(breaks, t_samples)
    steps = np.maximum(1, np.ceil(np.diff(breaks) / h - 1e-9)).astype(np.int64)
    return breaks, record, steps


def integrate(
    n: int,
    alpha: float,
    schedule: Schedule,
    psi0: np.ndarray,
    t_samples: np.ndarray,
    tol: float = RICHARDSON_TOL,
    method: str = "cf4",
    max_steps: int = MAX_STEPS,
) -> tuple[np.ndarray, int, float, float]:
    """Propagate ``psi0`` to every time in ``t_samples`` with step doubling.

    The step length is halved until two successive runs agree to ``tol`` at
    every sample.  Returns ``(states, total_steps, deviation, step_length)``.
    """
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    t_samples = np.asarray(t_samples, dtype=float)
    if len(t_samples) < 2 or schedule.T == 0:
        return np.tile(psi0, (len(t_samples), 1)), 0, 0.0, 0.0
    code = _propagate.METHODS[method]
    # long steps are fine for the Chebyshev exponential; refinement decides
    h = min(schedule.T, 4096.0) / 64.0

    def run(h):
        breaks, record, steps = step_plan(schedule, t_samples, h)
        if steps.sum() > max_steps:
            raise StepUnderflow(f"no convergence to {tol:g} within {max_steps} steps")
        states = _propagate.propagate(
            n, alpha, schedule.knots_t, schedule.knots_s, breaks, steps, record, psi0, code
        )
        return states, int(steps.sum())

    coarse, _ = run(h)
    while True:
        h /= 2.0
        fine, total = run(h)
        dev = float(np.max(np.linalg.norm(fine - coarse, axis=1)))
        log.debug("h=%.4g steps=%d deviation=%.3e", h, total, dev)
        if dev <= tol:
            return fine, total, dev, h
        coarse = fine


def _track(v: np.ndarray, previous: np.ndarray | None) -> np.ndarray:
    if previous is not None and float(np.dot(previous, v)) < 0:
        return -v
    return v


def evolve(
    n: int,
    alpha: float,
    schedule: Schedule,
    initial: ColumnState,
    sample_count: int = 201,
    *,
    tol: float = RICHARDSON_TOL,
    method: str = "cf4",
    kappa: float = 1.0,
) -> EvolutionResult:
    """Solve ``i d|psi>/dt = H(s(t))|psi>`` and record overlaps at even times.

    Instantaneous eigenstates are labelled by energy order; their signs are
    kept continuous between samples.
    """
    alpha = check_alpha(alpha)
    if sample_count < 2:
        raise ValueError("sample_count must be >= 2")
    if initial.n != n:
        raise ValueError("initial state has the wrong depth")
    t = np.linspace(0.0, schedule.T, sample_count)
    states, steps, dev, _ = integrate(n, alpha, schedule, initial.amplitudes, t, tol, method)
    s = schedule.s_of_t(t)
    u = uniform_state(n).amplitudes.real
    norm = np.linalg.norm(states, axis=1)
    p0 = np.empty(sample_count)
    p1 = np.empty(sample_count)
    prev0 = prev1 = None
    for i, si in enumerate(s):
        ev = eigen_low(column_hamiltonian(n, alpha, float(si)), 2)
        prev0 = _track(ev[0].vector, prev0)
        prev1 = _track(ev[1].vector, prev1)
        p0[i] = abs(np.vdot(prev0, states[i])) ** 2
        p1[i] = abs(np.vdot(prev1, states[i])) ** 2
    try:
        sb = stage_boundaries(n, alpha, kappa)
        stage = np.array([sb.stage_of(x) for x in s])
    except ValueError:
        stage = np.zeros(sample_count, dtype=int)
    drift = float(np.max(np.abs(norm - 1.0)))
    if drift > NORM_TOL:
        raise StepUnderflow(f"norm drift {drift:.2e} exceeds {NORM_TOL:g}")
    final = states[-1] / norm[-1]
    return EvolutionResult(
        t=t,
        s=s,
        norm=norm,
        p_phi0=p0,
        p_phi1=p1,
        p_u=np.abs(states @ u) ** 2,
        p_entrance=np.abs(states[:, 0]) ** 2,
        p_exit=np.abs(states[:, -1]) ** 2,
        stage=stage,
        final_state=ColumnState(final, n),
        states=states,
        steps=steps,
        richardson_deviation=dev,
    )


def transfer_matrix(n: int, alpha: float, schedule: Schedule, tol: float = RICHARDSON_TOL) -> np.ndarray:
    """``M[i, j] = |<phi_i(s_end)| U |phi_j(s_start)>|^2`` for ``i, j`` in {0, 1}."""
    alpha = check_alpha(alpha)
    start = eigen_low(column_hamiltonian(n, alpha, schedule.s_start), 2)
    end = eigen_low(column_hamiltonian(n, alpha, schedule.s_end), 2)
    out = np.empty((2, 2))
    for j in range(2):
        psi = start[j].vector.astype(complex)
        if schedule.s_end > schedule.s_start:
            states, _, _, _ = integrate(n, alpha, schedule, psi, np.array([0.0, schedule.T]), tol)
            psi = states[-1]
        for i in range(2):
            out[i, j] = abs(np.vdot(end[i].vector, psi)) ** 2
    return out


def transfer_fidelity(
    n: int,
    alpha: float,
    s_start: float,
    s_end: float,
    schedule_segment: Schedule | float,
    from_level: int = 0,
    to_level: int = 1,
    tol: float = RICHARDSON_TOL,
) -> float:
    """Evolve ``phi_from(s_start)`` over the segment, return overlap^2 with ``phi_to(s_end)``.

    ``schedule_segment`` is either a :class:`Schedule` covering exactly
    ``[s_start, s_end]`` or a constant rate ``ds/dt``.
    """
    if not (0.0 < s_start <= s_end < 1.0):
        raise ValueError("segment must lie inside (0, 1)")
    if not isinstance(schedule_segment, Schedule):
        schedule_segment = linear_segment(s_start, s_end, float(schedule_segment))
    if abs(schedule_segment.s_start - s_start) > 1e-14 or abs(schedule_segment.s_end - s_end) > 1e-14:
        raise ValueError("schedule segment does not span [s_start, s_end]")
    return float(transfer_matrix(n, alpha, schedule_segment, tol)[to_level, from_level])


@dataclass
class StagedReport:
    result: EvolutionResult
    boundaries: object
    fidelities: dict[str, float]


def staged_run(
    n: int,
    alpha: float,
    epsilon: float,
    kappa: float = 1.0,
    schedule: Schedule | None = None,
    sample_count: int = 401,
    tol: float = RICHARDSON_TOL,
) -> StagedReport:
    """Full anneal from ENTRANCE with the fidelity of each of the five stages.

    V1, V3, V5 are reported as overlap^2 with the level the state should be
    following at the stage's end (phi0, phi1, phi0); V2 and V4 as the
    diabatic transfer fidelity into phi1 at s2 and into phi0 at s4.
    """
    alpha = check_alpha(alpha)
    sb = stage_boundaries(n, alpha, kappa)
    if schedule is None:
        schedule = make_schedule("gap_adapted", n, alpha, epsilon, kappa=kappa)
    # sample at even times, plus the times where s crosses each boundary
    t_marks = np.interp([sb.s1, sb.s2, sb.s3, sb.s4], schedule.knots_s, schedule.knots_t)
    result = evolve(n, alpha, schedule, basis_state(n, 0), sample_count, tol=tol, kappa=kappa)
    t_all = np.concatenate([[0.0], t_marks, [schedule.T]])
    states, _, _, _ = integrate(n, alpha, schedule, basis_state(n, 0).amplitudes, t_all, tol)

    def overlap(level, s, psi):
        vec = eigen_low(column_hamiltonian(n, alpha, float(s)), 2)[level].vector
        return float(abs(np.vdot(vec, psi)) ** 2)

    fid = {
        "V1": overlap(0, sb.s1, states[1]),
        "V2": overlap(1, sb.s2, states[2]),
        "V3": overlap(1, sb.s3, states[3]),
        "V4": overlap(0, sb.s4, states[4]),
        "V5": float(abs(states[5][-1]) ** 2),
    }
    return StagedReport(result, sb, fid)


# -------------------------------------------------------- randomized preparation


@dataclass(frozen=True)
class RandomizedOutcome:
    success: bool
    chosen_initial: Literal["entrance", "u"]
    p_exit: float


_FINAL_EXIT_CACHE: dict[tuple, float] = {}


def _final_exit(n: int, alpha: float, schedule: Schedule, which: str, tol: float) -> float:
    key = (n, alpha, schedule.key(), which, tol)
    if key not in _FINAL_EXIT_CACHE:
        init = basis_state(n, 0) if which == "entrance" else uniform_state(n)
        states, _, _, _ = integrate(n, alpha, schedule, init.amplitudes, np.array([0.0, schedule.T]), tol)
        _FINAL_EXIT_CACHE[key] = float(abs(states[-1][-1]) ** 2)
    return _FINAL_EXIT_CACHE[key]


def randomized_init_run(
    n: int, alpha: float, schedule: Schedule, seed: int, tol: float = RICHARDSON_TOL
) -> RandomizedOutcome:
    """Flip a seeded fair coin between ENTRANCE and ``|u>``, anneal, test the exit.

    Success means the final overlap^2 with EXIT is at least 1/2.  Final
    overlaps are cached per initial state since the coin is the only random
    element.
    """
    rng = np.random.default_rng(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
    which = "entrance" if rng.random() < 0.5 else "u"
    p = _final_exit(n, check_alpha(alpha), schedule, which, tol)
    return RandomizedOutcome(p >= 0.5, which, p)


# ------------------------------------------------------------ full-basis check


def evolve_full(
    instance: GluedTreesInstance,
    alpha: float,
    schedule: Schedule,
    psi0: np.ndarray,
    t_samples: np.ndarray,
    h: float,
) -> np.ndarray:
    """Same two-exponential scheme as the column integrator, in the vertex basis.

    Exponentials come from scipy (dense ``expm`` for small graphs,
    ``expm_multiply`` otherwise), so this path shares no numerical kernel with
    the column-basis one.
    """
    c = np.sqrt(3.0) / 6.0
    wa, wb = _propagate.CF4_A, _propagate.CF4_B
    breaks, record, steps = step_plan(schedule, t_samples, h)
    # H(s) = (1-s) alpha H0 - s(1-s) A + s alpha H1 is a polynomial in s
    H0 = build_full_hamiltonian(instance, alpha, 0.0)
    H1 = build_full_hamiltonian(instance, alpha, 1.0)
    A = -4.0 * (build_full_hamiltonian(instance, alpha, 0.5) - 0.5 * (H0 + H1))

    if instance.N <= 64:
        H0, H1, A = H0.toarray(), H1.toarray(), A.toarray()

        def expm_apply(M, v):
            return sla.expm(M) @ v
    else:
        expm_apply = spla.expm_multiply

    def ham(s):
        return (1.0 - s) * H0 - s * (1.0 - s) * A + s * H1

    psi = np.asarray(psi0, dtype=complex)
    out = [psi.copy()]
    for i in range(len(breaks) - 1):
        dt = (breaks[i + 1] - breaks[i]) / steps[i]
        for k in range(steps[i]):
            t = breaks[i] + k * dt
            Ha = ham(float(schedule.s_of_t(t + (0.5 - c) * dt)))
            Hb = ham(float(schedule.s_of_t(t + (0.5 + c) * dt)))
            psi = expm_apply(-1j * dt * (wa * Ha + wb * Hb), psi)
            psi = expm_apply(-1j * dt * (wb * Ha + wa * Hb), psi)
        if record[i + 1]:
            out.append(psi.copy())
    return np.array(out)


def full_basis_crosscheck(
    instance: GluedTreesInstance,
    alpha: float,
    schedule: Schedule,
    sample_count: int = 21,
    tol: float = 1e-7,
) -> float:
    """Max |difference| between full-basis and column-basis exit-overlap traces."""
    n = instance.n
    if n > 8:
        raise ValueError("full-basis cross-check is limited to n <= 8")
    alpha = check_alpha(alpha)
    t = np.linspace(0.0, schedule.T, sample_count)
    col, _, _, h = integrate(n, alpha, schedule, basis_state(n, 0).amplitudes, t, tol)
    e = np.zeros(instance.N, dtype=complex)
    e[instance.index[instance.entrance]] = 1.0
    full = evolve_full(instance, alpha, schedule, e, t, h)
    p_full = np.abs(full[:, instance.index[instance.exit]]) ** 2
    p_col = np.abs(col[:, -1]) ** 2
    return float(np.max(np.abs(p_full - p_col)))


__all__ = [
    "Schedule",
    "EvolutionResult",
    "StepUnderflow",
    "make_schedule",
    "linear_segment",
    "integrate",
    "step_plan",
    "evolve",
    "transfer_matrix",
    "transfer_fidelity",
    "staged_run",
    "randomized_init_run",
    "evolve_full",
    "full_basis_crosscheck",
]
