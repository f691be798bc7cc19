"""Consensus matrices and distance-to-consensus functionals.

A consensus matrix is a Metzler matrix (nonnegative off-diagonal entries)
with zero row sums; its flow fixes every uniform state c*1 and drives a
connected network toward agreement.  This module validates such matrices,
bundles families of them into switched systems, and provides the exact
algebraic companions used everywhere else: the centering projection P,
the disagreement vector, and the state diameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    DimensionMismatch,
    InvalidPermutation,
    NegativeOffDiagonal,
    RowSumViolation,
)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ConsensusMatrix:
    """Validated n x n Metzler matrix with exactly zero row sums.

    Construct through validate_consensus_matrix; the entries array is
    read-only afterwards, so instances are safe to share across threads.
    """

    n: int
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _readonly(self.entries))

    @property
    def norm(self) -> float:
        return float(np.abs(self.entries).max(initial=0.0))


def validate_consensus_matrix(
    raw, tol: Tolerances = DEFAULT_TOLERANCES
) -> ConsensusMatrix:
    """Check Metzler structure and zero row sums, then re-center diagonals.

    Off-diagonal entries below -tol are rejected; tiny negative entries
    within tolerance are clamped to zero.  After the checks each diagonal
    entry is replaced by minus its off-diagonal row sum, so row sums vanish
    to machine rounding (exactly, for entries whose sum is representable)
    and long exponential products stay drift-free.
    """
    a = np.array(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise DimensionMismatch("matrix must be at least 1 x 1")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch("matrix entries must be finite")
    n = a.shape[0]
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    threshold = tol.row_sum * scale

    off = ~np.eye(n, dtype=bool)
    bad = (a < -threshold) & off
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise NegativeOffDiagonal(i, j, float(a[i, j]))

    row_sums = a.sum(axis=1)
    worst = int(np.argmax(np.abs(row_sums)))
    if abs(row_sums[worst]) > threshold:
        raise RowSumViolation(worst, float(row_sums[worst]), threshold)

    a[off] = np.maximum(a[off], 0.0)
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, -a.sum(axis=1))
    return ConsensusMatrix(n=n, entries=a)


@dataclass(frozen=True)
class SwitchedSystem:
    """Ordered family of consensus matrices sharing one dimension."""

    matrices: tuple

    def __post_init__(self):
        if len(self.matrices) < 1:
            raise DimensionMismatch("a switched system needs at least one matrix")
        ns = {m.n for m in self.matrices}
        if len(ns) != 1:
            raise DimensionMismatch(f"matrices disagree on dimension: {sorted(ns)}")
        object.__setattr__(self, "matrices", tuple(self.matrices))

    @property
    def n(self) -> int:
        return self.matrices[0].n

    @property
    def r(self) -> int:
        return len(self.matrices)

    def arrays(self) -> tuple:
        return tuple(m.entries for m in self.matrices)


def switched_system(
    raw_matrices: Sequence, tol: Tolerances = DEFAULT_TOLERANCES
) -> SwitchedSystem:
    """Validate a list of raw arrays into a SwitchedSystem."""
    return SwitchedSystem(
        matrices=tuple(validate_consensus_matrix(m, tol) for m in raw_matrices)
    )


_PROJECTION_CACHE: dict = {}


def projection_matrix(n: int) -> np.ndarray:
    """Centering projection P = I - (1/n) 11'; symmetric, idempotent, P1 = 0."""
    if n not in _PROJECTION_CACHE:
        _PROJECTION_CACHE[n] = _readonly(np.eye(n) - np.ones((n, n)) / n)
    return _PROJECTION_CACHE[n]


def average(x) -> float:
    """Mean of the agent states."""
    return float(np.mean(np.asarray(x, dtype=float)))


def consensus_distance(x) -> float:
    """Squared distance to agreement: sum_i (x_i - mean(x))^2 = x' P x."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    return float(d @ d)


def disagreement_vector(x) -> np.ndarray:
    """P x = x - mean(x) * 1; entries sum to zero."""
    x = np.asarray(x, dtype=float)
    return x - x.mean()


def diameter(x) -> float:
    """Spread max(x) - min(x); zero exactly on agreement states."""
    x = np.asarray(x, dtype=float)
    return float(x.max() - x.min())


def permute_system(
    sys: SwitchedSystem, perm: Sequence[int], tol: Tolerances = DEFAULT_TOLERANCES
) -> SwitchedSystem:
    """Relabel agents: each A becomes G A G' for the permutation matrix G.

    perm is a 0-based permutation of range(n); (G x)[i] = x[perm[i]].
    """
    n = sys.n
    p = list(perm)
    if sorted(p) != list(range(n)):
        raise InvalidPermutation(f"{perm!r} is not a permutation of range({n})")
    g = np.eye(n)[p]
    return switched_system([g @ m.entries @ g.T for m in sys.matrices], tol)
