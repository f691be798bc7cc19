import numpy as np
import pytest

from consensus_opt import (
    PiecewiseControl,
    average,
    consensus_distance,
    diameter,
    disagreement_vector,
    matrix_exponential,
    permute_system,
    projection_matrix,
    propagate,
    switched_system,
    validate_consensus_matrix,
)
from consensus_opt.errors import (
    DimensionMismatch,
    InvalidPermutation,
    NegativeOffDiagonal,
    RowSumViolation,
)
from consensus_opt.reference_examples import PAIR_3AGENT, PAIR_4AGENT

from conftest import random_consensus_matrix, random_system


class TestValidation:
    def test_accepts_reference_matrix(self):
        m = validate_consensus_matrix(PAIR_3AGENT[0])
        assert m.n == 3
        assert np.array_equal(m.entries.sum(axis=1), np.zeros(3))

    def test_accepts_zero_matrix(self):
        m = validate_consensus_matrix(np.zeros((3, 3)))
        assert np.all(m.entries == 0.0)

    def test_rejects_negative_off_diagonal(self):
        with pytest.raises(NegativeOffDiagonal) as exc:
            validate_consensus_matrix([[-1.0, -0.5, 1.5], [0, 0, 0], [0, 0, 0]])
        assert exc.value.index == (0, 1)

    def test_rejects_row_sum_violation(self):
        with pytest.raises(RowSumViolation):
            validate_consensus_matrix([[-1.0, 2.0], [1.0, -1.0]])

    def test_rejects_non_square_and_non_finite(self):
        with pytest.raises(DimensionMismatch):
            validate_consensus_matrix(np.zeros((2, 3)))
        with pytest.raises(DimensionMismatch):
            validate_consensus_matrix([[np.nan, 0.0], [0.0, 0.0]])

    def test_recentering_zeroes_row_sums(self, rng):
        # reference rows cancel exactly; random rows to machine rounding
        ref = validate_consensus_matrix(PAIR_3AGENT[0])
        assert np.array_equal(ref.entries @ np.ones(3), np.zeros(3))
        for _ in range(50):
            raw = random_consensus_matrix(rng, 4).entries.copy()
            raw[0, 0] += 1e-14
            m = validate_consensus_matrix(raw)
            scale = max(1.0, np.abs(m.entries).max())
            assert np.abs(m.entries @ np.ones(4)).max() <= 4e-16 * scale

    def test_entries_are_readonly(self):
        m = validate_consensus_matrix(PAIR_3AGENT[0])
        with pytest.raises(ValueError):
            m.entries[0, 0] = 1.0


class TestFunctionals:
    def test_consensus_distance_on_agreement(self):
        assert consensus_distance(3.7 * np.ones(5)) == 0.0

    def test_consensus_distance_simple(self):
        assert consensus_distance([1.0, 2.0, 2.0]) == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_consensus_distance_reference_terminal_state(self):
        x = [1.552900, 1.692310, 1.996691]
        assert consensus_distance(x) == pytest.approx(0.103011, abs=1e-5)

    def test_average(self):
        assert average([1.0, 2.0, 2.0]) == pytest.approx(5.0 / 3.0, abs=1e-15)
        assert average(2.5 * np.ones(7)) == 2.5
        assert average([1.0, -1.9, 0.9, -2.0]) == pytest.approx(-0.5, abs=1e-15)

    def test_disagreement_vector(self, rng):
        assert np.all(disagreement_vector(4.0 * np.ones(3)) == 0.0)
        np.testing.assert_allclose(
            disagreement_vector([1.0, 2.0, 2.0]), [-2 / 3, 1 / 3, 1 / 3], atol=1e-15
        )
        for _ in range(100):
            x = rng.normal(size=6)
            assert abs(disagreement_vector(x).sum()) < 1e-12 * max(1, np.abs(x).max())

    def test_distance_equals_disagreement_norm(self, rng):
        for _ in range(1000):
            x = rng.normal(size=int(rng.integers(2, 8))) * 10
            d = disagreement_vector(x)
            v = consensus_distance(x)
            assert v == pytest.approx(d @ d, rel=1e-12, abs=1e-300)

    def test_diameter(self):
        assert diameter(1.5 * np.ones(4)) == 0.0
        assert diameter([1.0, 2.0, 2.0]) == 1.0
        assert diameter([1.0, -1.9, 0.9, -2.0]) == 3.0


class TestProjection:
    def test_idempotent_symmetric_annihilates_ones(self):
        for n in (2, 3, 5, 8):
            p = projection_matrix(n)
            assert np.abs(p - p.T).max() == 0.0
            assert np.abs(p @ p - p).max() < 1e-12
            assert np.abs(p @ np.ones(n)).max() < 1e-12
            assert np.linalg.matrix_rank(p) == n - 1


class TestConsensusFlow:
    def test_ones_is_equilibrium(self, rng):
        for _ in range(20):
            m = random_consensus_matrix(rng, 4)
            scale = max(1.0, np.abs(m.entries).max())
            assert np.abs(m.entries @ np.ones(4)).max() <= 4e-16 * scale
            e = matrix_exponential(m.entries, rng.uniform(0.1, 5.0))
            assert np.abs(e @ np.ones(4) - np.ones(4)).max() < 1e-10


class TestPermutation:
    def test_identity_permutation(self):
        sys = switched_system(PAIR_3AGENT)
        same = permute_system(sys, (0, 1, 2))
        for a, b in zip(sys.matrices, same.matrices):
            assert np.array_equal(a.entries, b.entries)

    def test_reference_4agent_swap_maps_second_to_first(self):
        # relabeling agents 2 and 4 carries the second pattern onto the first
        sys = switched_system(PAIR_4AGENT)
        permuted = permute_system(sys, (0, 3, 2, 1))
        assert np.abs(permuted.matrices[1].entries - sys.matrices[0].entries).max() == 0.0

    def test_invalid_permutation(self):
        sys = switched_system(PAIR_3AGENT)
        with pytest.raises(InvalidPermutation):
            permute_system(sys, (0, 0, 1))

    def test_distance_is_permutation_invariant(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 7))
            x = rng.normal(size=n) * 5
            perm = rng.permutation(n)
            assert abs(consensus_distance(x[perm]) - consensus_distance(x)) < 1e-12

    def test_cost_of_fixed_control_is_permutation_invariant(self, rng):
        # same control, relabeled agents and start: identical terminal cost
        for _ in range(10):
            sys = random_system(rng, 4, 2)
            x0 = rng.normal(size=4)
            perm = list(rng.permutation(4))
            ctrl = PiecewiseControl.from_vertex_sequence(
                (0, 1), [0.4], 1.0, 2
            )
            base = propagate(sys, x0, ctrl).final_state
            g = np.eye(4)[perm]
            moved = propagate(permute_system(sys, perm), g @ x0, ctrl).final_state
            assert consensus_distance(base) == pytest.approx(
                consensus_distance(moved), rel=1e-10, abs=1e-14
            )
