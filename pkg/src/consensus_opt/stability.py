"""Uniform convergence to consensus: exact tests and certificates.

A consensus matrix reaches agreement from every start exactly when its
interaction digraph contains a rooted-out branching, equivalently when its
rank is n - 1.  For three agents switching between two patterns this
extends to the whole family: the switched system converges uniformly to
consensus (UCC) under arbitrary switching if and only if every convex
combination of the two generators keeps that rank.  The decision procedure
here is exact: after reduction the hull condition becomes positivity of an
explicit quadratic det(alpha barA_1 + (1 - alpha) barA_2) on [0, 1], which
is decided from its endpoint values and interior critical point rather
than by sampling.  Positive verdicts are accompanied by a common quadratic
Lyapunov certificate for the reduced pair whenever the 2 x 2 hull
conditions admit one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .core import ConsensusMatrix, SwitchedSystem, switched_system
from .errors import DimensionNotThree, NotHurwitz
from .reduction import default_basis, reduce_system


@dataclass(frozen=True)
class WeightedDigraph:
    """Interaction digraph: edge i -> j with weight a_ji when a_ji > 0."""

    n: int
    edges: tuple  # of (src, dst, weight), 0-based

    def edge_set(self) -> set:
        return {(i, j) for i, j, _ in self.edges}


def digraph_of(
    a: ConsensusMatrix, threshold: float = 0.0
) -> WeightedDigraph:
    """Edges above the threshold; node i influences node j via entry (j, i)."""
    if threshold < 0.0:
        raise ValueError("threshold must be nonnegative")
    entries = a.entries
    edges = []
    for i in range(a.n):
        for j in range(a.n):
            if i != j and entries[j, i] > threshold:
                edges.append((i, j, float(entries[j, i])))
    return WeightedDigraph(n=a.n, edges=tuple(edges))


def _numerical_rank(m: np.ndarray, tol: Tolerances):
    """(rank, singular values, marginal) with a relative threshold.

    A verdict is marginal when some singular value falls within a factor
    of 10 of the cut, i.e. the rank decision is numerically fragile.
    """
    smax_guard = np.linalg.svd(m, compute_uv=False)
    cut = tol.rank_rel * float(smax_guard[0]) if smax_guard.size else 0.0
    rank = int(np.sum(smax_guard > cut))
    marginal = bool(
        cut > 0.0
        and np.any((smax_guard > cut / 10.0) & (smax_guard < cut * 10.0))
    )
    return rank, smax_guard, marginal


def has_rooted_out_branching(
    a: ConsensusMatrix, tol: Tolerances = DEFAULT_TOLERANCES
) -> bool:
    """True iff rank(A) = n - 1, the exact criterion for a rooted-out
    branching in the digraph of a consensus matrix."""
    rank, _, _ = _numerical_rank(a.entries, tol)
    return rank == a.n - 1


def _det2(m: np.ndarray) -> float:
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def _mixed_det2(x: np.ndarray, y: np.ndarray) -> float:
    return float(x[0, 0] * y[1, 1] + y[0, 0] * x[1, 1] - x[0, 1] * y[1, 0] - y[0, 1] * x[1, 0])


def _det_quadratic(z1: np.ndarray, z2: np.ndarray):
    """Coefficients (c0, c1, c2) of det(alpha z1 + (1-alpha) z2)."""
    d = z1 - z2
    return _det2(z2), _mixed_det2(z2, d), _det2(d)


def _quad_min_on_unit(c0: float, c1: float, c2: float):
    """Minimum of c0 + c1 a + c2 a^2 over [0, 1] and its location."""
    candidates = [(c0, 0.0), (c0 + c1 + c2, 1.0)]
    if c2 > 0.0:
        v = -c1 / (2.0 * c2)
        if 0.0 < v < 1.0:
            candidates.append((c0 + c1 * v + c2 * v * v, v))
    return min(candidates)


@dataclass(frozen=True)
class HullBranchingResult:
    """Outcome of the exact hull rank test for a pair of 3 x 3 generators."""

    all_branching: bool
    failure_alpha: Optional[float]
    min_value: float
    min_alpha: float
    coefficients: tuple
    marginal: bool


def hull_branching_check_n3(
    a1: ConsensusMatrix,
    a2: ConsensusMatrix,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> HullBranchingResult:
    """Decide whether every hull matrix alpha A1 + (1-alpha) A2 has rank 2.

    Reduces both generators and forms d(alpha) = det of the reduced hull,
    an explicit quadratic that is positive exactly where the hull matrix
    keeps rank n - 1.  Positivity on [0, 1] is decided from the endpoints
    and the interior critical point, so the verdict has no sampling gaps.
    """
    if a1.n != 3 or a2.n != 3:
        raise DimensionNotThree("hull branching test is specific to n = 3")
    reduced = reduce_system(switched_system([a1.entries, a2.entries]))
    b1, b2 = reduced.bar_matrices
    c0, c1, c2 = _det_quadratic(b1, b2)
    scale = max(1.0, np.abs(b1).max(), np.abs(b2).max()) ** 2
    eps = tol.rank_rel * scale
    min_value, min_alpha = _quad_min_on_unit(c0, c1, c2)
    ok = min_value > eps
    return HullBranchingResult(
        all_branching=ok,
        failure_alpha=None if ok else min_alpha,
        min_value=min_value,
        min_alpha=min_alpha,
        coefficients=(c0, c1, c2),
        marginal=bool(eps / 10.0 < min_value < eps * 10.0),
    )


# ---------------------------------------------------------------------------
# 2 x 2 hull Hurwitz checks and the quadratic Lyapunov certificate
# ---------------------------------------------------------------------------


def _segment_violation(z1: np.ndarray, z2: np.ndarray) -> Optional[float]:
    """An alpha in [0, 1] where alpha z1 + (1-alpha) z2 fails to be Hurwitz,
    or None when the whole segment is Hurwitz.

    For 2 x 2 matrices Hurwitz means tr < 0 and det > 0.  The trace is
    linear in alpha (endpoints decide); the determinant quadratic is
    checked exactly on [0, 1].
    """
    t1, t2 = float(np.trace(z1)), float(np.trace(z2))
    if t1 >= 0.0 or t2 >= 0.0:
        return 1.0 if t1 >= t2 else 0.0
    min_det, at = _quad_min_on_unit(*_det_quadratic(z1, z2))
    if min_det <= 0.0:
        return at
    return None


def hurwitz_segment_2x2(z1, z2) -> bool:
    """True iff every convex combination of the two 2 x 2 matrices is Hurwitz."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if z1.shape != (2, 2) or z2.shape != (2, 2):
        raise DimensionNotThree("segment test needs 2 x 2 matrices")
    return _segment_violation(z1, z2) is None


@dataclass(frozen=True)
class QuadraticCertificate:
    """Y > 0 with residuals min eig of -(Y Z_i + Z_i' Y), all positive."""

    Y: np.ndarray
    residuals: tuple


@dataclass(frozen=True)
class CQLFNotFound:
    """Witness for non-existence (failing hull alpha) or a stalled search."""

    witness_alpha: Optional[float]
    failing_segment: str
    exists: Optional[bool]  # False: ruled out; None: exists but search stalled


def lyapunov_residuals(y, mats: Sequence) -> tuple:
    """Per-subsystem smallest eigenvalues of -(Y Z + Z' Y)."""
    y = np.asarray(y, dtype=float)
    out = []
    for z in mats:
        z = np.asarray(z, dtype=float)
        q = -(y @ z + z.T @ y)
        out.append(float(np.linalg.eigvalsh(q)[0]))
    return tuple(out)


def _is_hurwitz_2x2(z: np.ndarray) -> bool:
    return float(np.trace(z)) < 0.0 and _det2(z) > 0.0


def cqlf_search(z1, z2, tol: Tolerances = DEFAULT_TOLERANCES):
    """Common quadratic Lyapunov certificate for a 2 x 2 Hurwitz pair.

    Existence is decided first, by the two exact hull conditions: both
    co[Z1, Z2] and co[Z1, Z2^{-1}] must be Hurwitz.  When either fails the
    failing alpha is returned and no search runs.  When both hold, a
    certificate is exhibited by coordinate ascent on the minimum Lyapunov
    residual over Y = [[1, y3], [y3, y2]] (normalized so Y[0, 0] = 1),
    starting from a diagonal sweep; the first Y whose residuals all clear
    the positive-definiteness tolerance is returned.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if not _is_hurwitz_2x2(z1) or not _is_hurwitz_2x2(z2):
        raise NotHurwitz("certificate search requires two Hurwitz inputs")

    alpha = _segment_violation(z1, z2)
    if alpha is not None:
        return CQLFNotFound(alpha, "co[Z1,Z2]", exists=False)
    alpha = _segment_violation(z1, np.linalg.inv(z2))
    if alpha is not None:
        return CQLFNotFound(alpha, "co[Z1,Z2inv]", exists=False)

    def score(y2: float, y3: float) -> float:
        if y2 <= 0.0 or y3 * y3 >= y2:
            return -np.inf
        y = np.array([[1.0, y3], [y3, y2]])
        return min(lyapunov_residuals(y, (z1, z2)))

    best = (-np.inf, 1.0, 0.0)
    for y2 in np.logspace(-6.0, 6.0, 121):
        s = score(y2, 0.0)
        if s > best[0]:
            best = (s, y2, 0.0)

    def refine(y2: float, y3: float):
        for _ in range(4):
            lo, hi = np.log10(y2) - 1.0, np.log10(y2) + 1.0
            for cand in np.logspace(lo, hi, 41):
                if score(cand, y3) > score(y2, y3):
                    y2 = cand
            half = 0.99 * np.sqrt(y2)
            for cand in np.linspace(-half, half, 41):
                if score(y2, cand) > score(y2, y3):
                    y3 = cand
        return y2, y3

    s, y2, y3 = best
    if s <= tol.positive_definite:
        y2, y3 = refine(y2, y3)
        s = score(y2, y3)
    if s > tol.positive_definite:
        y = np.array([[1.0, y3], [y3, y2]])
        return QuadraticCertificate(Y=y, residuals=lyapunov_residuals(y, (z1, z2)))
    return CQLFNotFound(None, "search-stalled", exists=None)


# ---------------------------------------------------------------------------
# UCC decision for n = 3, r = 2, and the sampling screen beyond it
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UCCCertificate:
    """Evidence bundle for a positive verdict."""

    hull_quadratic: tuple  # coefficients of det(alpha barA1 + (1-alpha) barA2)
    segment_hurwitz: bool
    inverse_segment_hurwitz: Optional[bool]  # None when Z2 is near-singular
    cqlf: Optional[QuadraticCertificate]
    reduced_pair: tuple


@dataclass(frozen=True)
class UCCVerdict:
    decision: str  # "UCC" or "NotUCC"
    certificate: Optional[UCCCertificate]
    counterexample_alpha: Optional[float]
    marginal: bool
    notes: tuple = ()

    def __post_init__(self):
        populated = (self.certificate is not None) + (
            self.counterexample_alpha is not None
        )
        if populated != 1:
            raise ValueError("exactly one witness kind must be populated")


def ucc_decide_n3_r2(
    a1: ConsensusMatrix,
    a2: ConsensusMatrix,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> UCCVerdict:
    """Exact UCC decision for three agents switching between two patterns.

    UCC holds iff every hull matrix has rank 2 (rooted-out branching).  On
    success the verdict carries the reduced pair, both 2 x 2 hull Hurwitz
    checks (the inverse check is skipped when barA2 is near singular; the
    rank condition alone is decisive), and a quadratic Lyapunov exhibit
    when the search produces one.  On failure the witness alpha names a
    constant mixture u = [alpha, 1 - alpha] that never reaches consensus
    from generic starts.
    """
    hull = hull_branching_check_n3(a1, a2, tol)
    if not hull.all_branching:
        return UCCVerdict(
            decision="NotUCC",
            certificate=None,
            counterexample_alpha=hull.failure_alpha,
            marginal=hull.marginal,
            notes=(
                "constant control u = [alpha, 1-alpha] at the witness alpha "
                "does not converge to consensus",
            ),
        )
    reduced = reduce_system(switched_system([a1.entries, a2.entries]))
    b1, b2 = reduced.bar_matrices
    seg = hurwitz_segment_2x2(b1, b2)
    notes = []
    det_b2 = _det2(b2)
    scale = max(1.0, float(np.abs(b2).max())) ** 2
    if abs(det_b2) < tol.rank_rel * scale:
        inv_seg = None
        cqlf = None
        notes.append(
            "barA2 is near singular; inverse-segment check inapplicable, "
            "verdict rests on the hull rank criterion"
        )
    else:
        inv_seg = hurwitz_segment_2x2(b1, np.linalg.inv(b2))
        found = cqlf_search(b1, b2, tol)
        cqlf = found if isinstance(found, QuadraticCertificate) else None
        if cqlf is None:
            notes.append("quadratic certificate search stalled; verdict unaffected")
    return UCCVerdict(
        decision="UCC",
        certificate=UCCCertificate(
            hull_quadratic=hull.coefficients,
            segment_hurwitz=seg,
            inverse_segment_hurwitz=inv_seg,
            cqlf=cqlf,
            reduced_pair=(b1, b2),
        ),
        counterexample_alpha=None,
        marginal=hull.marginal,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class HullScreenResult:
    """Necessary-condition screen; a clean pass is NOT a UCC proof."""

    obstruction_free: bool
    failure_weights: Optional[tuple]
    samples_checked: int
    note: str = (
        "screen only: every sampled hull matrix has a rooted-out branching; "
        "this is necessary for UCC but not sufficient"
    )


def ucc_sample_check(
    sys: SwitchedSystem,
    hull_samples: int = 64,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> HullScreenResult:
    """Sample the simplex of hull weights and rank-test each hull matrix.

    Covers every vertex (so rank-deficient subsystems are always caught),
    all pairwise midpoints, and deterministic pseudo-random interior
    weights up to hull_samples total.  Reports the first failing weight
    vector; a pass means no obstruction was found, nothing more.
    """
    if hull_samples < 2:
        raise ValueError("hull_samples must be at least 2")
    r = sys.r
    weights = [np.eye(r)[i] for i in range(r)]
    for i in range(r):
        for j in range(i + 1, r):
            weights.append(0.5 * (np.eye(r)[i] + np.eye(r)[j]))
    if r == 2:
        for a in np.linspace(0.0, 1.0, hull_samples):
            weights.append(np.array([a, 1.0 - a]))
    else:
        rng = np.random.default_rng(0)
        while len(weights) < hull_samples + r:
            w = rng.dirichlet(np.ones(r))
            weights.append(w)
    arrays = sys.arrays()
    checked = 0
    for w in weights:
        hull = sum(wi * a for wi, a in zip(w, arrays))
        checked += 1
        rank, _, _ = _numerical_rank(hull, tol)
        if rank != sys.n - 1:
            if np.max(w) > 1.0 - 1e-12:
                note = (
                    "definitive obstruction: a single pattern lacks a rooted-out "
                    "branching, so the constant law using it never reaches consensus"
                )
            else:
                note = "hull matrix at the reported weights lacks a rooted-out branching"
            return HullScreenResult(
                obstruction_free=False,
                failure_weights=tuple(float(x) for x in w),
                samples_checked=checked,
                note=note,
            )
    return HullScreenResult(
        obstruction_free=True, failure_weights=None, samples_checked=checked
    )
