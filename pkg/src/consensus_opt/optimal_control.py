"""Best- and worst-case switching synthesis with first-order certification.

Two complementary solvers attack min/max of V(x(T)) over simplex-valued
controls:

- solve_bang_bang enumerates vertex sequences with a bounded switch count,
  coarse-grids the switch times, and polishes the best candidates with
  Nelder-Mead; every cost is an exact product of matrix exponentials.
- solve_relaxed runs a conditional-gradient sweep on a binned simplex
  control (forward propagate, backward costate, move each bin toward the
  pointwise-best vertex under an Armijo step).

Neither alone suffices: optimal controls need not be bang-bang (singular
arcs exist), and the relaxed sweep can stall on quantized switch times, so
reports carry a residual that measures violation of the first-order
optimality conditions and the two solvers cross-validate each other.

Sense convention: maximization is handled as minimization of -V.  The
costate terminal condition flips sign accordingly (lambda(T) = -P x(T)),
after which one rule covers both senses: an optimal control puts no mass
on a subsystem whose switching function m_i = lambda' A_i x strictly
exceeds the others, i.e. all mass sits on the pointwise minimizers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .config import DEFAULT_TOLERANCES, Tolerances
from .core import SwitchedSystem, consensus_distance, disagreement_vector
from .dynamics import (
    AdjointPath,
    PiecewiseControl,
    Trajectory,
    _segment_grid,
    matrix_exponential,
    propagate,
    propagate_adjoint,
)
from .errors import (
    DimensionMismatch,
    DimensionNotTwo,
    RequiresTwoSubsystems,
)
from .reduction import ReducedSystem, reduce_state

SINGULAR_REL_MARGIN = 1e-4


class Sense(Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"

    @property
    def sign(self) -> float:
        return 1.0 if self is Sense.MINIMIZE else -1.0


class SolveMethod(Enum):
    BANG_BANG_GRID = "bang-bang-grid"
    RELAXED_SWEEP = "relaxed-sweep"
    ANALYTIC_N2 = "analytic-n2"
    CONSTANT_SCAN = "constant-scan"


@dataclass(frozen=True)
class OCProblem:
    """Fixed-horizon problem: drive V(x(T)) to its best or worst value."""

    sys: SwitchedSystem
    x0: np.ndarray
    horizon: float
    sense: Sense = Sense.MINIMIZE

    def __post_init__(self):
        x = np.array(self.x0, dtype=float)
        if x.shape != (self.sys.n,):
            raise DimensionMismatch(
                f"x0 has shape {x.shape}, system dimension is {self.sys.n}"
            )
        if not self.horizon > 0.0:
            raise DimensionMismatch("horizon must be positive")
        x.flags.writeable = False
        object.__setattr__(self, "x0", x)
        object.__setattr__(self, "horizon", float(self.horizon))


@dataclass(frozen=True)
class SwitchingFunctionPath:
    """Sampled switching functions m_i(t) = lambda'(t) A_i x(t)."""

    times: np.ndarray
    values: np.ndarray  # shape (num_samples, r)

    def margin(self) -> np.ndarray:
        """Two-subsystem selection margin m_2 - m_1.

        Positive where the first subsystem is the pointwise-preferred
        choice (its switching function is the smaller one), negative where
        the second is; this is the scalar whose sign pattern appears in
        the reference switching-function plots.
        """
        if self.values.shape[1] != 2:
            raise RequiresTwoSubsystems("margin is defined for r = 2")
        return self.values[:, 1] - self.values[:, 0]

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))


@dataclass(frozen=True)
class OptimizationReport:
    """Solver output: control, cost, and the certification byproducts."""

    control: PiecewiseControl
    cost: float
    trajectory: Trajectory
    adjoint: AdjointPath
    switching: SwitchingFunctionPath
    mp_residual: float
    method: SolveMethod
    flags: tuple = ()


def _switching_data(prob, control, samples_per_segment, tol):
    traj = propagate(prob.sys, prob.x0, control, samples_per_segment, tol)
    lam_T = prob.sense.sign * disagreement_vector(traj.final_state)
    adj = propagate_adjoint(prob.sys, control, lam_T, samples_per_segment, tol)
    arrays = prob.sys.arrays()
    vals = np.empty((traj.times.size, prob.sys.r))
    for i, a in enumerate(arrays):
        vals[:, i] = np.einsum("kj,kj->k", adj.costates, traj.states @ a.T)
    return traj, adj, SwitchingFunctionPath(times=traj.times, values=vals)


def compute_switching_functions(
    prob: OCProblem,
    control: PiecewiseControl,
    samples_per_segment: int = 32,
    tol: Tolerances = DEFAULT_TOLERANCES,
):
    """Costate and switching functions for a given control.

    Forward propagate, set the terminal costate to +P x(T) (minimize) or
    -P x(T) (maximize), propagate backward, and evaluate every
    m_i(t) = lambda'(t) A_i x(t) on the shared sample grid.
    """
    _, adj, sw = _switching_data(prob, control, samples_per_segment, tol)
    return adj, sw


def evaluate_mp_residual(
    control: PiecewiseControl,
    switching: SwitchingFunctionPath,
    sense: Sense,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """Integral violation of the first-order optimality support condition.

    residual = integral of sum_i u_i(t) * max(0, m_i(t) - min_j m_j(t) - gap)
    by the trapezoid rule on the sample grid; zero means every unit of
    control mass sits on a pointwise-minimizing subsystem (up to the tie
    gap, so exactly coinciding switching functions, as on singular arcs,
    contribute nothing).

    The switching path must come from compute_switching_functions for the
    same problem sense: paths of maximize problems already carry the sign
    flip in their terminal condition, which is what turns the textbook
    "mass on the pointwise maximizers" rule for maximization into the same
    minimizer-support test used here for both senses.
    """
    del sense  # support test is sense-independent once the path encodes it
    m = switching.values
    u = control.value_at(np.clip(switching.times, 0.0, control.horizon))
    gap = tol.mp_gap_rel * switching.sup_norm()
    excess = np.maximum(0.0, m - m.min(axis=1, keepdims=True) - gap)
    integrand = (u * excess).sum(axis=1)
    return float(np.trapezoid(integrand, switching.times))


def _finalize(prob, control, method, flags, samples_per_segment, tol):
    traj, adj, sw = _switching_data(prob, control, samples_per_segment, tol)
    resid = evaluate_mp_residual(control, sw, prob.sense, tol)
    return OptimizationReport(
        control=control,
        cost=consensus_distance(traj.final_state),
        trajectory=traj,
        adjoint=adj,
        switching=sw,
        mp_residual=resid,
        method=method,
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# n = 2: closed form
# ---------------------------------------------------------------------------


def n2_closed_form_cost(sys: SwitchedSystem, x0, control: PiecewiseControl) -> float:
    """For n = 2 the cost is V(x0) * exp(2 sum_i tr(A_i) integral(u_i))."""
    if sys.n != 2:
        raise DimensionNotTwo(f"closed form needs n = 2, got n = {sys.n}")
    traces = np.array([np.trace(m.entries) for m in sys.matrices])
    durations = np.diff(control.breakpoints)
    integrals = control.values.T @ durations
    return consensus_distance(x0) * float(np.exp(2.0 * traces @ integrals))


def solve_analytic_n2(
    prob: OCProblem,
    samples_per_segment: int = 32,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> OptimizationReport:
    """Exact two-agent solution: a constant vertex control, no switches.

    The cost depends on the control only through the trace integrals, so
    the minimizer (maximizer) is the subsystem of smallest (largest)
    trace.  Trace ties make every control optimal, as does an agreement
    initial state; both are surfaced as flags, with the smallest index
    returned.
    """
    if prob.sys.n != 2:
        raise DimensionNotTwo(f"analytic solver needs n = 2, got n = {prob.sys.n}")
    traces = np.array([np.trace(m.entries) for m in prob.sys.matrices])
    flags = []
    if consensus_distance(prob.x0) == 0.0:
        k = 0
        flags.append("every-control-optimal-consensus-start")
    else:
        ordered = traces if prob.sense is Sense.MINIMIZE else -traces
        k = int(np.argmin(ordered))
        near = np.abs(ordered - ordered[k]) <= 1e-12 * max(1.0, abs(ordered[k]))
        if near.sum() > 1:
            flags.append("nonunique-trace-tie")
    vertex = np.zeros(prob.sys.r)
    vertex[k] = 1.0
    control = PiecewiseControl.constant(vertex, prob.horizon)
    return _finalize(
        prob, control, SolveMethod.ANALYTIC_N2, flags, samples_per_segment, tol
    )


# ---------------------------------------------------------------------------
# Bang-bang enumeration with switch-time refinement
# ---------------------------------------------------------------------------


def default_max_switches(n: int, r: int) -> int:
    """4 covers the nice-control classes for n <= 3, r = 2; 6 otherwise."""
    return 4 if (n <= 3 and r == 2) else 6


def _grid_for(k: int, grid: int) -> int:
    if k <= 2:
        return grid
    if k == 3:
        return max(8, min(grid, 12))
    if k == 4:
        return max(8, min(grid, 10))
    return max(8, min(grid, 8))


def _vertex_sequences(r: int, length: int):
    """All index sequences without immediate repeats."""
    for first in range(r):
        seqs = [(first,)]
        for _ in range(length - 1):
            seqs = [s + (v,) for s in seqs for v in range(r) if v != s[-1]]
        yield from seqs


def _bang_cost(arrays, x0, seq, times, horizon, signed: float) -> float:
    bounds = [0.0, *times, horizon]
    x = x0
    for v, (a, b) in zip(seq, zip(bounds[:-1], bounds[1:])):
        if b > a:
            x = matrix_exponential(arrays[v], b - a) @ x
    return signed * consensus_distance(x)


def _canonical(seq, times, horizon):
    """Drop segments shorter than 1e-6 T and merge equal neighbours.

    Nelder-Mead refinements routinely park two switch times a few 1e-9
    apart, encoding a spurious sliver segment; at the tolerances of the
    switch-time searches such slivers are indistinguishable from absent.
    """
    cut = 1e-6 * horizon
    bounds = [0.0, *times, horizon]
    out_seq, out_times = [], []
    for v, (a, b) in zip(seq, zip(bounds[:-1], bounds[1:])):
        if b - a <= cut:
            continue
        if out_seq and out_seq[-1] == v:
            continue
        if out_seq:
            out_times.append(a)
        out_seq.append(v)
    if not out_seq:
        out_seq = [seq[0]]
    return tuple(out_seq), tuple(out_times)


def _refine_switch_times(arrays, x0, seq, times, horizon, signed, refine_iters):
    k = len(times)
    if k == 0:
        return (), _bang_cost(arrays, x0, seq, (), horizon, signed)

    def objective(raw):
        taus = np.clip(np.sort(raw), 0.0, horizon)
        return _bang_cost(arrays, x0, seq, taus, horizon, signed)

    res = minimize(
        objective,
        np.asarray(times, dtype=float),
        method="Nelder-Mead",
        options={
            "maxiter": int(refine_iters),
            "xatol": 1e-8 * horizon,
            "fatol": 1e-13 * max(1.0, abs(objective(np.asarray(times)))),
        },
    )
    taus = tuple(np.clip(np.sort(res.x), 0.0, horizon))
    return taus, float(res.fun)


def _periodic_candidates(horizon: float, grid: int):
    """Bang-bang candidates that are periodic after three switches plus a
    final bang arc: (start vertex v, first duration, alternating period
    pair, tail duration).  Yields (seq, times) pairs for r = 2."""
    pts = horizon * np.arange(1, grid + 1) / (grid + 1)
    tails = horizon * np.array([0.0, 0.125, 0.25])
    for v in (0, 1):
        for t1 in pts:
            for a in pts:
                for b in pts:
                    for tail in tails:
                        cut = horizon - tail
                        if t1 >= cut:
                            continue
                        times = [t1]
                        dur = (a, b)
                        i = 0
                        while times[-1] + dur[i % 2] < cut - 1e-12 * horizon:
                            times.append(times[-1] + dur[i % 2])
                            i += 1
                            if len(times) > 24:
                                break
                        if len(times) > 24:
                            continue
                        seq = tuple((v + j) % 2 for j in range(len(times) + 1))
                        if tail > 0.0:
                            times.append(cut)
                            seq = seq + ((seq[-1] + 1) % 2,)
                        yield seq, tuple(times)


def solve_bang_bang(
    prob: OCProblem,
    max_switches: int | None = None,
    grid: int = 16,
    refine_iters: int = 200,
    samples_per_segment: int = 32,
    periodic_scan: str = "auto",
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> OptimizationReport:
    """Enumerate vertex sequences and optimize their switch times.

    For every switch count k <= max_switches and every vertex sequence
    without immediate repeats, switch times are coarse-gridded over the
    ordered simplex 0 <= tau_1 <= ... <= tau_k <= T (grid resolution
    shrinks with k to keep the candidate count bounded), then the best
    candidates are refined by Nelder-Mead over the switch times with
    infeasible orderings repaired by sorting.  Costs are exact exponential
    products throughout.  Always returns a candidate; solution quality is
    reflected in the report's mp_residual.

    When n = 3 and r = 2 a dedicated scan over controls that are periodic
    after three switches (plus a final bang arc) is run if the refined
    optimum still violates the first-order conditions, or unconditionally
    with periodic_scan="always".
    """
    if grid < 8:
        raise DimensionMismatch("grid must be at least 8")
    explicit_cap = max_switches is not None
    if max_switches is None:
        max_switches = default_max_switches(prob.sys.n, prob.sys.r)
    if max_switches < 0:
        raise DimensionMismatch("max_switches must be nonnegative")
    if periodic_scan not in ("auto", "always", "never"):
        raise DimensionMismatch("periodic_scan must be auto, always, or never")

    arrays = prob.sys.arrays()
    x0 = prob.x0
    horizon = prob.horizon
    signed = prob.sense.sign

    best_per_k: dict = {}
    top: list = []

    def consider(candidate):
        val, k = candidate[0], len(candidate[2])
        if k not in best_per_k or val < best_per_k[k][0]:
            best_per_k[k] = candidate
        top.append(candidate)
        top.sort(key=lambda c: c[0])
        del top[8:]

    for k in range(max_switches + 1):
        g = _grid_for(k, grid)
        step = horizon / (g + 1)
        cache = [
            {d: matrix_exponential(a, d * step) for d in range(1, g + 2)}
            for a in arrays
        ]
        for seq in _vertex_sequences(prob.sys.r, k + 1):
            for combo in itertools.combinations(range(1, g + 1), k):
                bounds = (0, *combo, g + 1)
                x = x0
                for v, (a, b) in zip(seq, zip(bounds[:-1], bounds[1:])):
                    if b > a:
                        x = cache[v][b - a] @ x
                val = signed * consensus_distance(x)
                consider((val, seq, tuple(t * step for t in combo)))

    refine_set = {(c[1], c[2]) for c in top}
    refine_set.update((c[1], c[2]) for c in best_per_k.values())
    best_val, best_seq, best_times = np.inf, (0,), ()
    for seq, times in sorted(refine_set):
        taus, _ = _refine_switch_times(
            arrays, x0, seq, times, horizon, signed, refine_iters
        )
        cseq, ctimes = _canonical(seq, taus, horizon)
        val = _bang_cost(arrays, x0, cseq, ctimes, horizon, signed)
        if val < best_val:
            best_val, best_seq, best_times = val, cseq, ctimes

    control = PiecewiseControl.from_vertex_sequence(
        best_seq, best_times, horizon, prob.sys.r
    )
    report = _finalize(
        prob, control, SolveMethod.BANG_BANG_GRID, (), samples_per_segment, tol
    )

    # The periodic family can exceed the requested switch count (chattering
    # approximations of singular arcs), so an explicit cap disables it.
    run_periodic = periodic_scan == "always"
    if (
        periodic_scan == "auto"
        and not explicit_cap
        and prob.sys.n == 3
        and prob.sys.r == 2
    ):
        bound = SINGULAR_REL_MARGIN * horizon * report.switching.sup_norm()
        run_periodic = report.mp_residual > bound > 0.0
    if run_periodic and prob.sys.r == 2:
        per_best = None
        for seq, times in _periodic_candidates(horizon, 8):
            val = _bang_cost(arrays, x0, seq, times, horizon, signed)
            if per_best is None or val < per_best[0]:
                per_best = (val, seq, times)
        if per_best is not None:
            taus, _ = _refine_switch_times(
                arrays, x0, per_best[1], per_best[2], horizon, signed, refine_iters
            )
            cseq, ctimes = _canonical(per_best[1], taus, horizon)
            val = _bang_cost(arrays, x0, cseq, ctimes, horizon, signed)
            if val < best_val - 1e-15:
                control = PiecewiseControl.from_vertex_sequence(
                    cseq, ctimes, horizon, prob.sys.r
                )
                report = _finalize(
                    prob,
                    control,
                    SolveMethod.BANG_BANG_GRID,
                    ("periodic-family",),
                    samples_per_segment,
                    tol,
                )
    return report


# ---------------------------------------------------------------------------
# Relaxed conditional-gradient sweep
# ---------------------------------------------------------------------------


def _compress(control: PiecewiseControl) -> PiecewiseControl:
    """Merge adjacent segments carrying identical values."""
    bp = [control.breakpoints[0]]
    vals = []
    for j in range(control.num_segments):
        v = control.values[j]
        if vals and np.array_equal(vals[-1], v):
            bp[-1] = control.breakpoints[j + 1]
        else:
            bp.append(control.breakpoints[j + 1])
            vals.append(v)
    return PiecewiseControl(np.array(bp), np.array(vals))


def _bin_averages(path: SwitchingFunctionPath, spans) -> np.ndarray:
    out = np.empty((len(spans), path.values.shape[1]))
    for b, (s, e) in enumerate(spans):
        width = path.times[e] - path.times[s]
        out[b] = np.trapezoid(path.values[s : e + 1], path.times[s : e + 1], axis=0)
        out[b] /= width
    return out


def solve_relaxed(
    prob: OCProblem,
    time_bins: int = 96,
    max_iters: int = 80,
    tol_improve: float = 1e-10,
    samples_per_segment: int = 8,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> OptimizationReport:
    """Conditional-gradient sweep on a binned simplex-valued control.

    Each iteration: propagate forward, propagate the costate backward, and
    for every bin pick the target vertex whose switching function has the
    smallest bin average (the first-order descent direction for the signed
    cost); then take an Armijo-backtracked step from the current control
    toward the target control.  Iterates stay inside the simplex because
    every step is a convex combination.  Stops on stationarity, when the
    cost improvement falls below tol_improve, or after max_iters.
    """
    if time_bins < 16:
        raise DimensionMismatch("time_bins must be at least 16")
    r = prob.sys.r
    edges = np.linspace(0.0, prob.horizon, time_bins + 1)
    widths = np.diff(edges)
    u = np.full((time_bins, r), 1.0 / r)
    flags = []
    if consensus_distance(prob.x0) == 0.0:
        flags.append("consensus-start-cost-zero")
        control = _compress(PiecewiseControl(edges, u))
        return _finalize(
            prob, control, SolveMethod.RELAXED_SWEEP, flags, 32, tol
        )

    signed = prob.sense.sign

    def signed_cost(ctrl_values):
        traj = propagate(
            prob.sys, prob.x0, PiecewiseControl(edges, ctrl_values), 1, tol
        )
        return signed * consensus_distance(traj.final_state)

    current = signed_cost(u)
    for _ in range(max_iters):
        _, _, sw = _switching_data(
            prob, PiecewiseControl(edges, u), samples_per_segment, tol
        )
        _, spans = _segment_grid(edges, samples_per_segment)
        mavg = _bin_averages(sw, spans)
        target = np.zeros_like(u)
        target[np.arange(time_bins), np.argmin(mavg, axis=1)] = 1.0
        direction = target - u
        slope = 2.0 * float(np.sum(widths[:, None] * direction * mavg))
        if slope >= -1e-12 * max(1.0, abs(current)):
            flags.append("stationary")
            break
        gamma, accepted = 1.0, False
        while gamma > 1e-10:
            trial = u + gamma * direction
            value = signed_cost(trial)
            if value <= current + 1e-4 * gamma * slope:
                accepted = True
                break
            gamma *= 0.5
        if not accepted:
            flags.append("line-search-exhausted")
            break
        u = np.clip(u + gamma * direction, 0.0, 1.0)
        u /= u.sum(axis=1, keepdims=True)
        previous, current = current, signed_cost(u)
        if previous - current < tol_improve:
            break

    control = _compress(PiecewiseControl(edges, u))
    return _finalize(prob, control, SolveMethod.RELAXED_SWEEP, flags, 32, tol)


# ---------------------------------------------------------------------------
# Constant-control scan (diagnostic for singular optima)
# ---------------------------------------------------------------------------


def constant_control_scan(
    prob: OCProblem,
    grid: int = 65,
    samples_per_segment: int = 32,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> OptimizationReport:
    """Best constant mixture u = [alpha, 1 - alpha] for two subsystems.

    Scans a uniform alpha grid, then refines the best bracket by
    golden-section.  A constant interior optimum beating every bang-bang
    candidate is the signature of a singular optimal control.
    """
    if prob.sys.r != 2:
        raise RequiresTwoSubsystems(
            f"constant scan needs exactly 2 subsystems, got {prob.sys.r}"
        )
    a1, a2 = prob.sys.arrays()
    signed = prob.sense.sign
    horizon = prob.horizon

    def value(alpha: float) -> float:
        gen = alpha * a1 + (1.0 - alpha) * a2
        x = matrix_exponential(gen, horizon) @ prob.x0
        return signed * consensus_distance(x)

    alphas = np.linspace(0.0, 1.0, int(grid))
    scores = np.array([value(a) for a in alphas])
    i = int(np.argmin(scores))
    lo = alphas[max(0, i - 1)]
    hi = alphas[min(len(alphas) - 1, i + 1)]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = value(c), value(d)
    for _ in range(60):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = value(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = value(d)
    alpha = 0.5 * (lo + hi)
    control = PiecewiseControl.constant([alpha, 1.0 - alpha], horizon)
    return _finalize(
        prob, control, SolveMethod.CONSTANT_SCAN, (), samples_per_segment, tol
    )


# ---------------------------------------------------------------------------
# Reduced-order certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedMP:
    """Reduced costate mu(t) and reduced switching functions on one grid."""

    times: np.ndarray
    costates: np.ndarray
    switching: SwitchingFunctionPath


def compute_reduced_mp(
    prob: OCProblem,
    control: PiecewiseControl,
    reduced: ReducedSystem,
    samples_per_segment: int = 32,
) -> ReducedMP:
    """First-order conditions evaluated in the (n-1)-dimensional quotient.

    Propagates z forward, sets mu(T) = +/- M z(T) per sense, propagates mu
    backward with the transposed segment exponentials, and samples
    barm_i(t) = mu'(t) barA_i z(t).  These coincide with the full-order
    switching functions sample by sample, while halving the state plus
    costate order from 2n to 2n - 2.
    """
    bars = reduced.bar_matrices
    z = reduce_state(prob.x0, reduced.basis)
    m = max(1, int(samples_per_segment))
    times, _ = _segment_grid(control.breakpoints, m)
    steps = []
    for j in range(control.num_segments):
        h = (control.breakpoints[j + 1] - control.breakpoints[j]) / m
        gen = sum(w * b for w, b in zip(control.values[j], bars))
        steps.append(matrix_exponential(gen, h))
    zs = np.empty((times.size, z.size))
    zs[0] = z
    pos = 0
    for e in steps:
        for _ in range(m):
            pos += 1
            zs[pos] = e @ zs[pos - 1]
    mus = np.empty_like(zs)
    mus[-1] = prob.sense.sign * (reduced.metric @ zs[-1])
    pos = times.size - 1
    for e in reversed(steps):
        et = e.T
        for _ in range(m):
            pos -= 1
            mus[pos] = et @ mus[pos + 1]
    vals = np.empty((times.size, len(bars)))
    for i, b in enumerate(bars):
        vals[:, i] = np.einsum("kj,kj->k", mus, zs @ b.T)
    return ReducedMP(
        times=times,
        costates=mus,
        switching=SwitchingFunctionPath(times=times, values=vals),
    )


def singular_signature(
    bang_bang: OptimizationReport, relaxed: OptimizationReport, sense: Sense
) -> bool:
    """True when the relaxed solver strictly beats the bang-bang optimum.

    A relative margin above 1e-4 means no bang-bang control of the searched
    class is optimal, the hallmark of a singular (interior) optimum.
    """
    margin = (bang_bang.cost - relaxed.cost) * sense.sign
    return margin > SINGULAR_REL_MARGIN * max(abs(bang_bang.cost), 1e-300)
