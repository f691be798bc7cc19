import numpy as np
import pytest

from consensus_opt import (
    CQLFNotFound,
    PiecewiseControl,
    QuadraticCertificate,
    consensus_distance,
    cqlf_search,
    digraph_of,
    has_rooted_out_branching,
    hull_branching_check_n3,
    hurwitz_segment_2x2,
    lyapunov_residuals,
    propagate,
    reduce_state,
    reduce_system,
    switched_system,
    ucc_decide_n3_r2,
    ucc_sample_check,
    validate_consensus_matrix,
)
from consensus_opt.errors import DimensionNotThree, NotHurwitz
from consensus_opt.reference_examples import PAIR_3AGENT, PAIR_4AGENT

from conftest import random_bang_bang, random_consensus_matrix, random_consensus_raw

# 2x2 Hurwitz pair whose direct hull is Hurwitz but whose inverse hull is
# not, so no common quadratic certificate exists (witness alpha ~ 0.22).
NO_CQLF_PAIR = (
    np.array([[0.56530264, -3.73442516], [2.19049323, -0.66167748]]),
    np.array([[-5.17816059, 2.12296711], [3.35354745, -1.75225903]]),
)


def chain_matrix_3():
    # 3 <- 2 <- 1 listening chain; rank 2, rooted-out branching at node 1
    return validate_consensus_matrix(
        [[0.0, 0.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, -1.0]]
    )


def disconnected_matrix_3():
    # agents {1,2} interact, agent 3 is isolated; rank 1
    return validate_consensus_matrix(
        [[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]]
    )


class TestDigraph:
    def test_zero_matrix_has_no_edges(self):
        g = digraph_of(validate_consensus_matrix(np.zeros((3, 3))))
        assert g.edges == ()

    def test_reference_matrix_edges(self):
        a1 = validate_consensus_matrix(PAIR_3AGENT[0])
        g = digraph_of(a1)
        # entry (j, i) > 0 puts an edge i -> j carrying that weight
        assert g.edge_set() == {(1, 0), (0, 1), (1, 2)}
        weights = {(i, j): w for i, j, w in g.edges}
        assert weights[(1, 0)] == 3.0
        assert weights[(0, 1)] == 2.0
        assert weights[(1, 2)] == 0.01

    def test_block_disconnected_components(self):
        a1 = validate_consensus_matrix(PAIR_4AGENT[0])
        g = digraph_of(a1)
        for i, j in g.edge_set():
            assert (i < 2) == (j < 2)  # no edge crosses the two blocks

    def test_threshold_filters_weak_edges(self):
        a1 = validate_consensus_matrix(PAIR_3AGENT[0])
        g = digraph_of(a1, threshold=0.5)
        assert (1, 2) not in g.edge_set()


class TestRootedOutBranching:
    def test_reference_matrix_has_branching(self):
        assert has_rooted_out_branching(validate_consensus_matrix(PAIR_3AGENT[0]))

    def test_block_disconnected_has_none(self):
        assert not has_rooted_out_branching(validate_consensus_matrix(PAIR_4AGENT[0]))

    def test_zero_matrix_has_none(self):
        assert not has_rooted_out_branching(validate_consensus_matrix(np.zeros((3, 3))))

    def test_rank_equals_reduced_determinant_sign(self, rng):
        # rank(A) = 2 exactly when det(barA) is positive, 500 mixed draws
        agree = 0
        for k in range(500):
            kind = k % 3
            if kind == 0:
                m = random_consensus_matrix(rng, 3)
            elif kind == 1:
                m = chain_matrix_3() if k % 2 else disconnected_matrix_3()
            else:
                m = random_consensus_matrix(rng, 3, density=0.4)
            bar = reduce_system(switched_system([m.entries])).bar_matrices[0]
            det = float(np.linalg.det(bar))
            branching = has_rooted_out_branching(m)
            scale = max(1.0, np.abs(bar).max()) ** 2
            if branching == (det > 1e-9 * scale):
                agree += 1
        assert agree == 500

    def test_trace_and_det_signs(self, rng):
        for _ in range(200):
            m = random_consensus_matrix(rng, 3, density=float(rng.uniform(0.2, 1.0)))
            bar = reduce_system(switched_system([m.entries])).bar_matrices[0]
            tr = float(np.trace(bar))
            det = float(np.linalg.det(bar))
            assert tr <= 1e-12
            assert det >= -1e-12
            if np.abs(m.entries).max() > 0:
                assert tr < 0.0

    def test_product_trace_nonnegative(self, rng):
        for _ in range(200):
            m1 = random_consensus_matrix(rng, 3, density=0.7)
            m2 = random_consensus_matrix(rng, 3, density=0.7)
            red = reduce_system(switched_system([m1.entries, m2.entries]))
            b1, b2 = red.bar_matrices
            assert np.trace(b2 @ b1) >= -1e-12


class TestHullBranching:
    def test_reference_pair_passes(self):
        a1 = validate_consensus_matrix(PAIR_3AGENT[0])
        a2 = validate_consensus_matrix(PAIR_3AGENT[1])
        res = hull_branching_check_n3(a1, a2)
        assert res.all_branching
        assert res.failure_alpha is None

    def test_identical_rank_deficient_pair_fails_everywhere(self):
        a = disconnected_matrix_3()
        res = hull_branching_check_n3(a, a)
        assert not res.all_branching
        assert res.failure_alpha is not None

    def test_zero_endpoint_fails_at_zero(self):
        a1 = chain_matrix_3()
        a2 = validate_consensus_matrix(np.zeros((3, 3)))
        res = hull_branching_check_n3(a1, a2)
        assert not res.all_branching
        assert res.failure_alpha == pytest.approx(0.0)

    def test_dimension_guard(self):
        a = validate_consensus_matrix(PAIR_4AGENT[0])
        with pytest.raises(DimensionNotThree):
            hull_branching_check_n3(a, a)


class TestHurwitzSegment:
    def test_identical_stable(self):
        assert hurwitz_segment_2x2(-np.eye(2), -np.eye(2))

    def test_reference_reduced_pair(self):
        red = reduce_system(switched_system(PAIR_3AGENT))
        assert hurwitz_segment_2x2(*red.bar_matrices)

    def test_unstable_endpoint(self):
        z1 = np.array([[-1.0, 0.0], [0.0, -1.0]])
        z2 = np.array([[1.0, 0.0], [0.0, -1.0]])
        assert not hurwitz_segment_2x2(z1, z2)

    def test_interior_determinant_root_detected(self):
        # both endpoints Hurwitz, midpoint determinant negative
        z1 = np.array([[-1.0, 10.0], [0.0, -1.0]])
        z2 = np.array([[-1.0, 0.0], [10.0, -1.0]])
        assert not hurwitz_segment_2x2(z1, z2)


class TestCQLF:
    def test_reference_pair_has_certificate(self):
        red = reduce_system(switched_system(PAIR_3AGENT))
        found = cqlf_search(*red.bar_matrices)
        assert isinstance(found, QuadraticCertificate)
        assert min(found.residuals) > 1e-10
        assert np.linalg.eigvalsh(found.Y)[0] > 0.0

    def test_reference_exhibit_validates(self):
        red = reduce_system(switched_system(PAIR_3AGENT))
        res = lyapunov_residuals(np.diag([1.0, 0.04]), red.bar_matrices)
        assert min(res) > 1e-10

    def test_identity_pair_returns_identity(self):
        found = cqlf_search(-np.eye(2), -np.eye(2))
        assert isinstance(found, QuadraticCertificate)
        np.testing.assert_array_equal(found.Y, np.eye(2))

    def test_inverse_segment_violation_reported(self):
        found = cqlf_search(*NO_CQLF_PAIR)
        assert isinstance(found, CQLFNotFound)
        assert found.exists is False
        assert found.failing_segment == "co[Z1,Z2inv]"
        assert 0.0 <= found.witness_alpha <= 1.0

    def test_direct_segment_violation_reported(self):
        z1 = np.array([[-1.0, 10.0], [0.0, -1.0]])
        z2 = np.array([[-1.0, 0.0], [10.0, -1.0]])
        found = cqlf_search(z1, z2)
        assert isinstance(found, CQLFNotFound)
        assert found.failing_segment == "co[Z1,Z2]"

    def test_rejects_non_hurwitz_input(self):
        with pytest.raises(NotHurwitz):
            cqlf_search(np.eye(2), -np.eye(2))


class TestUCCDecision:
    def test_reference_pair_is_ucc_with_sound_certificate(self, rng):
        a1 = validate_consensus_matrix(PAIR_3AGENT[0])
        a2 = validate_consensus_matrix(PAIR_3AGENT[1])
        verdict = ucc_decide_n3_r2(a1, a2)
        assert verdict.decision == "UCC"
        cert = verdict.certificate
        assert cert.segment_hurwitz and cert.inverse_segment_hurwitz
        assert cert.cqlf is not None
        # soundness: |z|_Y non-increasing along random switched trajectories
        sys = switched_system(PAIR_3AGENT)
        red = reduce_system(sys)
        y = cert.cqlf.Y
        for _ in range(100):
            x0 = rng.normal(size=3) * 2
            traj = propagate(sys, x0, random_bang_bang(rng, 2, 2.0), 8)
            norms = [
                reduce_state(x, red.basis) @ y @ reduce_state(x, red.basis)
                for x in traj.states
            ]
            norms = np.array(norms)
            assert np.all(np.diff(norms) <= 1e-10 * max(1.0, norms[0]))

    def test_disconnected_pair_is_not_ucc_with_sound_witness(self, rng):
        a = disconnected_matrix_3()
        verdict = ucc_decide_n3_r2(a, a)
        assert verdict.decision == "NotUCC"
        alpha = verdict.counterexample_alpha
        assert alpha is not None
        # soundness: the constant mixture at alpha keeps V away from zero
        sys = switched_system([a.entries, a.entries])
        x0 = np.array([1.0, -1.0, 4.0])
        ctrl = PiecewiseControl.constant([alpha, 1.0 - alpha], 50.0)
        traj = propagate(sys, x0, ctrl, 64)
        v0 = consensus_distance(x0)
        assert consensus_distance(traj.final_state) > 0.1 * v0

    def test_one_good_one_zero_pattern(self):
        verdict = ucc_decide_n3_r2(
            chain_matrix_3(), validate_consensus_matrix(np.zeros((3, 3)))
        )
        assert verdict.decision == "NotUCC"
        assert verdict.counterexample_alpha == pytest.approx(0.0)

    def test_exactly_one_witness_kind(self):
        a1 = validate_consensus_matrix(PAIR_3AGENT[0])
        a2 = validate_consensus_matrix(PAIR_3AGENT[1])
        verdict = ucc_decide_n3_r2(a1, a2)
        assert (verdict.certificate is None) != (verdict.counterexample_alpha is None)


class TestSampleScreen:
    def test_reference_4agent_pair_fails_at_a_vertex(self):
        # each pattern alone is disconnected, so the screen must flag the
        # constant law even though mixtures are connected
        sys = switched_system(PAIR_4AGENT)
        res = ucc_sample_check(sys, 32)
        assert not res.obstruction_free
        assert max(res.failure_weights) == pytest.approx(1.0)
        assert "definitive" in res.note

    def test_interior_mixture_of_reference_pair_is_connected(self):
        hull = 0.5 * np.array(PAIR_4AGENT[0]) + 0.5 * np.array(PAIR_4AGENT[1])
        assert has_rooted_out_branching(validate_consensus_matrix(hull))

    def test_copies_of_branching_matrix_pass(self):
        m = chain_matrix_3()
        sys = switched_system([m.entries, m.entries, m.entries])
        res = ucc_sample_check(sys, 16)
        assert res.obstruction_free

    def test_family_with_zero_matrix_fails_at_vertex(self):
        sys = switched_system([chain_matrix_3().entries, np.zeros((3, 3))])
        res = ucc_sample_check(sys, 16)
        assert not res.obstruction_free
        assert res.failure_weights[1] == pytest.approx(1.0)

    def test_screen_result_carries_disclaimer(self):
        sys = switched_system([chain_matrix_3().entries] * 2)
        res = ucc_sample_check(sys, 8)
        assert "necessary" in res.note
