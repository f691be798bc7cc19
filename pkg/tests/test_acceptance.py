"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible with -s or -rA) and asserts
the criterion.  Fixture-value criteria reuse the bundled reference checks
so the CLI harness and this gate cannot drift apart; the property criteria
run their independent oracles directly here.
"""

import time

import numpy as np
import pytest

from consensus_opt import (
    OCProblem,
    PiecewiseControl,
    compute_switching_functions,
    consensus_distance,
    lyapunov_residuals,
    metric_norm_sq,
    n2_closed_form_cost,
    propagate,
    propagate_adjoint,
    reduce_state,
    reduce_system,
    switched_system,
    ucc_decide_n3_r2,
    validate_consensus_matrix,
)
from consensus_opt.reference_examples import (
    PAIR_3AGENT,
    check_cqlf,
    check_example2,
    check_example3,
    check_example7,
    check_example8,
)

from conftest import (
    random_bang_bang,
    random_consensus_matrix,
    random_nonuniform_state,
    random_system,
)


def _gate(name: str, ok: bool, detail: str = ""):
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail and not ok:
        line += f"  ({detail})"
    print(line)
    assert ok, detail


def _rows_ok(rows):
    bad = [r for r in rows if not r.passed]
    detail = "; ".join(f"{r.quantity}: expected {r.expected}, got {r.actual}" for r in bad)
    return not bad, detail


def test_criterion_1_example2_reproduction():
    ok, detail = _rows_ok(check_example2())
    _gate("1 example2 best-case reproduction", ok, detail)


def test_criterion_2_example3_reproduction():
    ok, detail = _rows_ok(check_example3())
    _gate("2 example3 four-agent reproduction", ok, detail)


def test_criterion_3_example7_worst_case():
    ok, detail = _rows_ok(check_example7())
    _gate("3 example7 worst-case reproduction", ok, detail)


def test_criterion_4_example8_singular_optimum():
    ok, detail = _rows_ok(check_example8())
    _gate("4 example8 singular optimum", ok, detail)


def test_criterion_5_reduction_identities(rng):
    ok = True
    detail = ""
    two = reduce_system(random_system(rng, 2, 2))
    if two.metric[0, 0] != 0.5:
        ok, detail = False, f"n=2 metric {two.metric[0, 0]!r} != 0.5"
    three = reduce_system(switched_system(PAIR_3AGENT))
    expected_m = np.array([[2.0, 1.0], [1.0, 2.0]]) / 3.0
    if np.abs(three.metric - expected_m).max() > 1e-15:
        ok, detail = False, "n=3 metric deviates beyond 1e-15"
    if np.abs(three.bar_matrices[0] - np.array([[-5.0, 0.0], [2.0, -0.01]])).max() > 1e-12:
        ok, detail = False, "reduced pattern 1 deviates beyond 1e-12"
    if np.abs(three.bar_matrices[1] - np.array([[-3.0, 0.0], [1.0, -0.1]])).max() > 1e-12:
        ok, detail = False, "reduced pattern 2 deviates beyond 1e-12"
    for _ in range(100):
        n = int(rng.integers(2, 6))
        sys = random_system(rng, n, 2)
        red = reduce_system(sys)
        traj = propagate(sys, rng.normal(size=n) * 3, random_bang_bang(rng, 2, 1.5), 8)
        for x in traj.states[::4]:
            v = consensus_distance(x)
            zn = metric_norm_sq(reduce_state(x, red.basis), red.metric)
            if abs(zn - v) > 1e-9 * max(v, 1e-12):
                ok, detail = False, f"V vs |z|_M mismatch: {v} vs {zn}"
                break
        if not ok:
            break
    _gate("5 reduction identities (metrics, reduced pair, V = z'Mz)", ok, detail)


def test_criterion_6_cqlf_exhibit():
    ok, detail = _rows_ok(check_cqlf())
    y = np.diag([100.0, 4.0])
    red = reduce_system(switched_system(PAIR_3AGENT))
    res = lyapunov_residuals(y, red.bar_matrices)
    if min(res) <= 1e-10:
        ok, detail = False, "exhibit residuals not positive definite within 1e-10"
    _gate("6 quadratic Lyapunov exhibit diag(100, 4)", ok, detail)


def test_criterion_7a_adjoint_zero_sum(rng):
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        sys = random_system(rng, n, 2)
        lam = rng.normal(size=n)
        lam -= lam.mean()
        path = propagate_adjoint(sys, random_bang_bang(rng, 2, 2.0), lam, 8)
        scale = max(1.0, float(np.abs(path.costates).max()))
        worst = max(worst, float(np.abs(path.costates.sum(axis=1)).max()) / scale)
    _gate("7a costate zero-sum on 200 random propagations", worst < 1e-9, f"worst {worst:.2e}")


def test_criterion_7b_diameter_monotone(rng):
    ok = True
    for _ in range(200):
        n = int(rng.integers(2, 7))
        sys = random_system(rng, n, 2, density=float(rng.uniform(0.4, 1.0)))
        traj = propagate(sys, rng.normal(size=n) * 3, random_bang_bang(rng, 2, 2.0), 8)
        diams = np.array([x.max() - x.min() for x in traj.states])
        if not np.all(np.diff(diams) <= 1e-10 * max(1.0, diams[0])):
            ok = False
            break
    _gate("7b diameter non-increasing on 200 random trajectories", ok)


def test_criterion_7c_two_agent_closed_form(rng):
    worst = 0.0
    for _ in range(100):
        sys = random_system(rng, 2, int(rng.integers(2, 4)))
        x0 = random_nonuniform_state(rng, 2)
        ctrl = random_bang_bang(rng, sys.r, 1.5)
        v = consensus_distance(propagate(sys, x0, ctrl, 4).final_state)
        ref = n2_closed_form_cost(sys, x0, ctrl)
        worst = max(worst, abs(v - ref) / max(ref, 1e-300))
    _gate("7c n=2 closed-form cost on 100 random instances", worst < 1e-9, f"worst {worst:.2e}")


def test_criterion_7d_gradient_check(rng):
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 5))
        sys = random_system(rng, n, 2)
        x0 = random_nonuniform_state(rng, n)
        prob = OCProblem(sys, x0, 1.0)
        bins = 16
        edges = np.linspace(0.0, 1.0, bins + 1)
        u = 0.1 + 0.8 * rng.dirichlet(np.ones(2), size=bins)
        u /= u.sum(axis=1, keepdims=True)
        ctrl = PiecewiseControl(edges, u)
        _, sw = compute_switching_functions(prob, ctrl, 32)
        b = int(rng.integers(bins))
        direction = np.eye(2)[int(rng.integers(2))] - u[b]
        mask = (sw.times >= edges[b]) & (sw.times <= edges[b + 1])
        analytic = 2.0 * np.trapezoid(sw.values[mask] @ direction, sw.times[mask])

        def cost_with(eps):
            mod = u.copy()
            mod[b] = u[b] + eps * direction
            return consensus_distance(
                propagate(sys, x0, PiecewiseControl(edges, mod), 1).final_state
            )

        fd = (cost_with(1e-5) - cost_with(-1e-5)) / 2e-5
        worst = max(worst, abs(analytic - fd) / max(abs(fd), abs(analytic), 1e-10))
    _gate("7d relaxed-solver gradient vs finite differences", worst < 1e-4, f"worst {worst:.2e}")


def test_criterion_7e_rank_equals_reduced_determinant(rng):
    chain = validate_consensus_matrix(
        [[0.0, 0.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, -1.0]]
    )
    split = validate_consensus_matrix(
        [[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]]
    )
    agree = 0
    from consensus_opt import has_rooted_out_branching

    for k in range(500):
        kind = k % 3
        if kind == 0:
            m = random_consensus_matrix(rng, 3)
        elif kind == 1:
            m = chain if k % 2 else split
        else:
            m = random_consensus_matrix(rng, 3, density=0.4)
        bar = reduce_system(switched_system([m.entries])).bar_matrices[0]
        det = float(np.linalg.det(bar))
        scale = max(1.0, float(np.abs(bar).max())) ** 2
        if has_rooted_out_branching(m) == (det > 1e-9 * scale):
            agree += 1
    _gate("7e rank vs reduced determinant on 500 matrices", agree == 500, f"{agree}/500")


def test_criterion_7f_ucc_verdicts_cross_checked(rng):
    ok = True
    detail = ""
    # positive verdict: Lyapunov norm non-increasing along switched runs
    a1 = validate_consensus_matrix(PAIR_3AGENT[0])
    a2 = validate_consensus_matrix(PAIR_3AGENT[1])
    verdict = ucc_decide_n3_r2(a1, a2)
    if verdict.decision != "UCC" or verdict.certificate.cqlf is None:
        ok, detail = False, "reference pair not certified"
    else:
        sys = switched_system(PAIR_3AGENT)
        red = reduce_system(sys)
        y = verdict.certificate.cqlf.Y
        for _ in range(100):
            traj = propagate(
                sys, rng.normal(size=3) * 2, random_bang_bang(rng, 2, 2.0), 8
            )
            norms = np.array(
                [
                    reduce_state(x, red.basis) @ y @ reduce_state(x, red.basis)
                    for x in traj.states
                ]
            )
            if not np.all(np.diff(norms) <= 1e-10 * max(1.0, norms[0])):
                ok, detail = False, "Lyapunov norm increased along a trajectory"
                break
    # negative verdict: witness mixture keeps the distance away from zero
    if ok:
        disc = validate_consensus_matrix(
            [[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]]
        )
        bad = ucc_decide_n3_r2(disc, disc)
        alpha = bad.counterexample_alpha
        if bad.decision != "NotUCC" or alpha is None:
            ok, detail = False, "degenerate pair not rejected"
        else:
            sysd = switched_system([disc.entries, disc.entries])
            x0 = np.array([1.0, -1.0, 4.0])
            horizon = 50.0 / max(np.abs(disc.entries).max(), 1.0)
            ctrl = PiecewiseControl.constant([alpha, 1.0 - alpha], horizon)
            v_end = consensus_distance(propagate(sysd, x0, ctrl, 64).final_state)
            if v_end <= 0.1 * consensus_distance(x0):
                ok, detail = False, f"witness mixture converged (V={v_end:.3g})"
    _gate("7f UCC verdicts cross-checked by simulation", ok, detail)


def test_criterion_8_reference_harness_exits_clean():
    from consensus_opt.cli import main

    start = time.perf_counter()
    code = main(["paper-examples"])
    elapsed = time.perf_counter() - start
    ok = code == 0 and elapsed < 60.0
    _gate(
        "8 paper-examples harness green under 60 s",
        ok,
        f"exit {code} in {elapsed:.1f}s",
    )
