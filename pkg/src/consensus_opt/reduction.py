"""Quotient of the consensus dynamics by the agreement subspace.

Changing coordinates with a basis whose first row is 1' and whose remaining
rows are zero-sum turns each generator A into a block form whose first
column vanishes; dropping the first coordinate leaves an (n-1)-dimensional
system z' = (sum_i u_i barA_i) z together with a positive-definite metric M
such that the distance to consensus satisfies V(x(t)) = z(t)' M z(t) along
every trajectory.  Uniform convergence to consensus of the full system is
equivalent to uniform stability of this reduced system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .core import SwitchedSystem, projection_matrix
from .errors import BasisNotAdapted, DimensionMismatch


@dataclass(frozen=True)
class ReductionBasis:
    """Invertible S whose rows are the basis covectors; row 1 is 1'.

    Rows 2..n must be zero-sum so they span the complement of the agreement
    line.  S_inv is computed once (LU with partial pivoting) and cached.
    """

    S: np.ndarray
    S_inv: np.ndarray

    def __post_init__(self):
        s = np.array(self.S, dtype=float)
        si = np.array(self.S_inv, dtype=float)
        n = s.shape[0]
        if s.shape != (n, n) or si.shape != (n, n):
            raise DimensionMismatch("basis matrices must be square and matching")
        if np.abs(s @ si - np.eye(n)).max() > 1e-10:
            raise BasisNotAdapted("S_inv is not an inverse of S to 1e-10")
        if np.abs(s[0] - 1.0).max() > 1e-12:
            raise BasisNotAdapted("first basis row must be the all-ones covector")
        if n > 1 and np.abs(s[1:].sum(axis=1)).max() > 1e-10:
            raise BasisNotAdapted("rows 2..n must each sum to zero")
        s.flags.writeable = False
        si.flags.writeable = False
        object.__setattr__(self, "S", s)
        object.__setattr__(self, "S_inv", si)

    @property
    def n(self) -> int:
        return int(self.S.shape[0])

    def selector(self) -> np.ndarray:
        """R: drops the first coordinate, (n-1) x n."""
        return np.eye(self.n)[1:]


def default_basis(n: int) -> ReductionBasis:
    """Difference basis: row 1 is 1'; row k is e_{k-1} - e_k for k = 2..n.

    This fixed choice reproduces the reference reduced matrices and metrics
    (barA entries, M = 1/2 for n = 2, M = (1/3)[[2,1],[1,2]] for n = 3)
    bit-for-bit, which keeps regressions exact.
    """
    if n < 2:
        raise DimensionMismatch("reduction needs n >= 2")
    s = np.zeros((n, n))
    s[0] = 1.0
    for k in range(1, n):
        s[k, k - 1] = 1.0
        s[k, k] = -1.0
    s_inv = np.linalg.solve(s, np.eye(n))
    return ReductionBasis(S=s, S_inv=s_inv)


def basis_from_matrix(s) -> ReductionBasis:
    """Hook for a caller-supplied adapted basis; validated, not default."""
    s = np.array(s, dtype=float)
    return ReductionBasis(S=s, S_inv=np.linalg.solve(s, np.eye(s.shape[0])))


@dataclass(frozen=True)
class ReducedSystem:
    """Reduced generators barA_i, metric M, and the basis that made them."""

    bar_matrices: tuple
    metric: np.ndarray
    basis: ReductionBasis
    selector: np.ndarray

    @property
    def n_reduced(self) -> int:
        return int(self.metric.shape[0])

    @property
    def r(self) -> int:
        return len(self.bar_matrices)


def reduce_system(
    sys: SwitchedSystem,
    basis: ReductionBasis | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ReducedSystem:
    """Conjugate each generator by S and drop the agreement coordinate.

    barA_i is the lower-right (n-1) block of S A_i S^{-1}; the first column
    of that product must vanish (it does exactly when row 1 of S is 1' and
    A_i has zero row sums), which is verified to 1e-10 scaled by |A_i| to
    guard against non-consensus input sneaking through.

    The metric is M = R (S^{-1})' P S^{-1} R', symmetric positive definite,
    and satisfies V(x) = z' M z for z = R S x.
    """
    if basis is None:
        basis = default_basis(sys.n)
    if basis.n != sys.n:
        raise DimensionMismatch(f"basis is {basis.n}-dimensional, system is {sys.n}")
    s, si = basis.S, basis.S_inv
    r_sel = basis.selector()
    bars = []
    for m in sys.matrices:
        conj = s @ m.entries @ si
        col_err = float(np.abs(conj[:, 0]).max())
        if col_err > 1e-10 * max(1.0, m.norm):
            raise BasisNotAdapted(
                f"first column of S A S^inv has magnitude {col_err:.3e}; "
                "basis row 1 must be a multiple of the all-ones covector"
            )
        bar = conj[1:, 1:].copy()
        bar.flags.writeable = False
        bars.append(bar)
    p = projection_matrix(sys.n)
    metric = r_sel @ si.T @ p @ si @ r_sel.T
    metric = 0.5 * (metric + metric.T)
    smallest = float(np.linalg.eigvalsh(metric)[0])
    if smallest <= tol.positive_definite:
        raise BasisNotAdapted(
            f"reduced metric is not positive definite (min eig {smallest:.3e})"
        )
    metric.flags.writeable = False
    return ReducedSystem(
        bar_matrices=tuple(bars), metric=metric, basis=basis, selector=r_sel
    )


def reduce_state(x, basis: ReductionBasis) -> np.ndarray:
    """z = R S x; agreement states map to the origin."""
    x = np.asarray(x, dtype=float)
    return (basis.S @ x)[1:]


def metric_norm_sq(z, metric) -> float:
    """z' M z; equals V(x) when z = R S x and M is the reduced metric."""
    z = np.asarray(z, dtype=float)
    return float(z @ np.asarray(metric) @ z)


def lifted_diameter(z, basis: ReductionBasis) -> float:
    """Diameter of any lift of z: max(Qz) - min(Qz) with Q = S^{-1} sans column 1.

    Invariant under the dropped agreement coordinate, so it equals the state
    diameter of every x with R S x = z.
    """
    z = np.asarray(z, dtype=float)
    q = basis.S_inv[:, 1:]
    w = q @ z
    return float(w.max() - w.min())
