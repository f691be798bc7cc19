"""Propagation of the bilinear consensus control system and its costate.

The control relaxation replaces the switching signal by a simplex-valued
control u(t); the state then follows dx/dt = (sum_i u_i A_i) x.  Piecewise
constant controls are propagated by exact matrix exponentials segment by
segment, never by generic ODE stepping: published six-decimal trajectory
values are exponential products, and exactness keeps integrator tuning out
of the regression suite.  A fixed-step RK4 integrator is provided for
genuinely time-varying generators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .core import SwitchedSystem
from .errors import (
    DimensionMismatch,
    ExponentialOverflow,
    SimplexViolation,
    TerminalNotZeroSum,
)

SIMPLEX_TOL = 1e-12

# Order-13 Pade coefficients for the diagonal approximant of exp.
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_PADE13_THETA = 5.371920351148152
_NORM_LIMIT = 600.0


def matrix_exponential(m, t: float = 1.0) -> np.ndarray:
    """exp(M t) by scaling and squaring with the order-13 Pade approximant.

    Deterministic (no norm estimation, no adaptivity): the scaling power is
    s = ceil(log2(norm1 / theta13)) whenever the scaled norm exceeds the
    standard threshold.  Accurate to ~1e-12 relative in norm for moderate
    norms; raises ExponentialOverflow when norm1(M t) is large enough to
    make squaring meaningless.
    """
    a = np.asarray(m, dtype=float) * float(t)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch("matrix entries must be finite")
    n = a.shape[0]
    norm1 = float(np.abs(a).sum(axis=0).max(initial=0.0))
    if norm1 == 0.0:
        return np.eye(n)
    if norm1 > _NORM_LIMIT:
        raise ExponentialOverflow(
            f"norm1(M t) = {norm1:.3g} exceeds the supported limit {_NORM_LIMIT}"
        )
    s = 0
    if norm1 > _PADE13_THETA:
        s = int(np.ceil(np.log2(norm1 / _PADE13_THETA)))
        a = a / (2.0**s)

    b = _PADE13
    ident = np.eye(n)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6
        + b[5] * a4
        + b[3] * a2
        + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6
        + b[4] * a4
        + b[2] * a2
        + b[0] * ident
    )
    e = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        e = e @ e
    return e


def _check_simplex(u: np.ndarray, r: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (r,):
        raise SimplexViolation(f"control value has shape {u.shape}, expected ({r},)")
    if u.min(initial=0.0) < -SIMPLEX_TOL or abs(u.sum() - 1.0) > SIMPLEX_TOL:
        raise SimplexViolation(f"{u!r} is not a point of the {r}-simplex")
    return u


def system_matrix(
    sys: SwitchedSystem, u, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """Convex combination sum_i u_i A_i of the subsystem generators."""
    u = _check_simplex(np.asarray(u, dtype=float), sys.r)
    out = np.zeros((sys.n, sys.n))
    for w, m in zip(u, sys.matrices):
        if w != 0.0:
            out += w * m.entries
    return out


@dataclass(frozen=True)
class PiecewiseControl:
    """Piecewise constant simplex-valued control on [0, T].

    breakpoints: 0 = t_0 < t_1 < ... < t_k = T
    values:      k simplex points; value j is active on [t_{j-1}, t_j).
    Bang-bang controls are the special case of vertex-valued entries.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float)
        vals = np.atleast_2d(np.array(self.values, dtype=float))
        if bp.ndim != 1 or bp.size < 2:
            raise SimplexViolation("need at least [0, T] as breakpoints")
        if bp[0] != 0.0:
            raise SimplexViolation("first breakpoint must be 0")
        if not np.all(np.diff(bp) > 0.0):
            raise SimplexViolation("breakpoints must be strictly increasing")
        if vals.shape[0] != bp.size - 1:
            raise SimplexViolation(
                f"{vals.shape[0]} values for {bp.size - 1} segments"
            )
        for row in vals:
            _check_simplex(row, vals.shape[1])
        bp.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def r(self) -> int:
        return int(self.values.shape[1])

    @property
    def num_segments(self) -> int:
        return int(self.values.shape[0])

    def segment_index(self, t) -> np.ndarray:
        idx = np.searchsorted(self.breakpoints, np.asarray(t, dtype=float), "right") - 1
        return np.clip(idx, 0, self.num_segments - 1)

    def value_at(self, t) -> np.ndarray:
        return self.values[self.segment_index(t)]

    def switch_times(self) -> np.ndarray:
        return np.asarray(self.breakpoints[1:-1], dtype=float)

    def restrict(self, t0: float, t1: float) -> "PiecewiseControl":
        """Sub-control on [t0, t1], re-based to start at time 0."""
        if not (0.0 <= t0 < t1 <= self.horizon + 1e-15):
            raise SimplexViolation(f"[{t0}, {t1}] is not inside [0, {self.horizon}]")
        inner = self.breakpoints[(self.breakpoints > t0) & (self.breakpoints < t1)]
        bp = np.concatenate(([t0], inner, [t1]))
        mids = 0.5 * (bp[:-1] + bp[1:])
        return PiecewiseControl(bp - t0, self.values[self.segment_index(mids)])

    @classmethod
    def constant(cls, u, horizon: float) -> "PiecewiseControl":
        return cls(np.array([0.0, float(horizon)]), np.atleast_2d(u))

    @classmethod
    def from_vertex_sequence(
        cls, indices: Sequence[int], switch_times: Sequence[float], horizon: float, r: int
    ) -> "PiecewiseControl":
        """Bang-bang control visiting subsystem indices (0-based) in order.

        Zero-length segments produced by coincident switch times are merged.
        """
        times = [0.0, *sorted(float(t) for t in switch_times), float(horizon)]
        if len(indices) != len(times) - 1:
            raise SimplexViolation(
                f"{len(indices)} indices need {len(indices) - 1} switch times"
            )
        bp = [0.0]
        vals = []
        for idx, (a, b) in zip(indices, zip(times[:-1], times[1:])):
            if not 0 <= idx < r:
                raise SimplexViolation(f"subsystem index {idx} outside range({r})")
            if b - a <= 1e-15 * max(1.0, horizon):
                continue
            vertex = np.zeros(r)
            vertex[idx] = 1.0
            if vals and np.array_equal(vals[-1], vertex):
                bp[-1] = b
            else:
                bp.append(b)
                vals.append(vertex)
        if not vals:
            vertex = np.zeros(r)
            vertex[indices[0]] = 1.0
            bp, vals = [0.0, float(horizon)], [vertex]
        bp[-1] = float(horizon)
        return cls(np.array(bp), np.array(vals))


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution x(t); sample times include every control breakpoint."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        x = np.array(self.states, dtype=float)
        if t.ndim != 1 or x.ndim != 2 or x.shape[0] != t.size:
            raise DimensionMismatch("times and states disagree")
        if not np.all(np.isfinite(x)):
            raise DimensionMismatch("trajectory contains non-finite states")
        t.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class AdjointPath:
    """Sampled costate; carries the zero-sum first integral 1' lambda = 0."""

    times: np.ndarray
    costates: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        lam = np.array(self.costates, dtype=float)
        if t.ndim != 1 or lam.ndim != 2 or lam.shape[0] != t.size:
            raise DimensionMismatch("times and costates disagree")
        t.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "costates", lam)

    @property
    def final_costate(self) -> np.ndarray:
        return self.costates[-1]


def _segment_grid(breakpoints: np.ndarray, samples_per_segment: int):
    """Sample times with every breakpoint included once.

    Returns (times, spans) where spans[j] = (start_index, end_index) of
    segment j in the times array, sharing endpoints between segments.
    """
    m = max(1, int(samples_per_segment))
    times = [0.0]
    spans = []
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        start = len(times) - 1
        times.extend(a + (b - a) * (np.arange(1, m + 1) / m))
        times[-1] = b
        spans.append((start, len(times) - 1))
    return np.array(times), spans


def _segment_step_exponentials(sys, control, samples_per_segment, tol):
    m = max(1, int(samples_per_segment))
    steps = []
    for j in range(control.num_segments):
        h = (control.breakpoints[j + 1] - control.breakpoints[j]) / m
        gen = system_matrix(sys, control.values[j], tol)
        steps.append(matrix_exponential(gen, h))
    return steps, m


def propagate(
    sys: SwitchedSystem,
    x0,
    control: PiecewiseControl,
    samples_per_segment: int = 32,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Trajectory:
    """Exact per-segment propagation of dx/dt = (sum_i u_i A_i) x.

    Within segment j of constant control the state advances by the cached
    substep exponential exp(M_j h); every control breakpoint is a mandatory
    sample and segments are subdivided samples_per_segment times.
    """
    x = np.asarray(x0, dtype=float)
    if x.shape != (sys.n,):
        raise DimensionMismatch(f"x0 has shape {x.shape}, expected ({sys.n},)")
    if control.r != sys.r:
        raise DimensionMismatch(
            f"control has {control.r} components, system has {sys.r}"
        )
    steps, m = _segment_step_exponentials(sys, control, samples_per_segment, tol)
    times, _ = _segment_grid(control.breakpoints, m)
    states = np.empty((times.size, sys.n))
    states[0] = x
    pos = 0
    for e in steps:
        for _ in range(m):
            pos += 1
            states[pos] = e @ states[pos - 1]
    return Trajectory(times=times, states=states)


def propagate_adjoint(
    sys: SwitchedSystem,
    control: PiecewiseControl,
    lambda_T,
    samples_per_segment: int = 32,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> AdjointPath:
    """Backward propagation of dl/dt = -(sum_i u_i A_i)' l from l(T).

    Reuses the forward substep exponentials transposed, so the discrete
    costate is the exact adjoint of the discrete forward map.  The terminal
    value must satisfy 1' lambda_T = 0 (zero-sum first integral); the same
    identity is re-checked on every sample of the returned path.
    """
    lam = np.asarray(lambda_T, dtype=float)
    if lam.shape != (sys.n,):
        raise DimensionMismatch(f"lambda_T has shape {lam.shape}, expected ({sys.n},)")
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    if abs(lam.sum()) > tol.adjoint_zero_sum * scale:
        raise TerminalNotZeroSum(
            f"1' lambda_T = {lam.sum():.3e} exceeds {tol.adjoint_zero_sum:.1e} * {scale:.3g}"
        )
    steps, m = _segment_step_exponentials(sys, control, samples_per_segment, tol)
    times, _ = _segment_grid(control.breakpoints, m)
    costates = np.empty((times.size, sys.n))
    costates[-1] = lam
    pos = times.size - 1
    for e in reversed(steps):
        et = e.T
        for _ in range(m):
            pos -= 1
            costates[pos] = et @ costates[pos + 1]
    drift = float(np.abs(costates.sum(axis=1)).max())
    bound = tol.adjoint_zero_sum * max(1.0, float(np.abs(costates).max()))
    if drift > bound:
        raise TerminalNotZeroSum(
            f"zero-sum first integral drifted to {drift:.3e} (bound {bound:.3e})"
        )
    return AdjointPath(times=times, costates=costates)


def propagate_general(
    matrix_of_t: Callable[[float], np.ndarray],
    x0,
    horizon: float,
    step: float,
) -> Trajectory:
    """Classical fixed-step RK4 for dx/dt = M(t) x with time-varying M.

    Fallback for measurable, non piecewise-constant generators; global
    error is O(step^4).
    """
    if step <= 0.0:
        raise DimensionMismatch("step must be positive")
    x = np.asarray(x0, dtype=float)
    nsteps = max(1, int(np.ceil(horizon / step - 1e-12)))
    times = np.empty(nsteps + 1)
    states = np.empty((nsteps + 1, x.size))
    times[0] = 0.0
    states[0] = x
    t = 0.0
    for k in range(nsteps):
        h = min(step, horizon - t)
        k1 = matrix_of_t(t) @ x
        mid = matrix_of_t(t + h / 2)
        k2 = mid @ (x + h / 2 * k1)
        k3 = mid @ (x + h / 2 * k2)
        k4 = matrix_of_t(t + h) @ (x + h * k3)
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
        times[k + 1] = t
        states[k + 1] = x
    return Trajectory(times=times, states=states)
