"""Command-line front end.

Subcommands: validate, simulate, reduce, optimize, worst-case, ucc,
mp-verify, paper-examples.  Problem definitions come from versioned JSON
files; dense results go to CSV (17 significant digits, comma separated,
LF endings) with matching PNG figures rendered alongside, and structured
results go to JSON reports written atomically.

Exit codes: 0 ok, 1 parse error, 2 validation error, 3 regression failure.
The environment variable CONSENSUS_OPT_TOL_FILE may name a JSON file that
overrides the shared tolerance record.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import Optional

import numpy as np

from . import __version__
from .config import Tolerances, tolerances_from_env
from .core import consensus_distance, diameter, validate_consensus_matrix
from .dynamics import PiecewiseControl, propagate
from .errors import ConsensusOptError, ProblemFileError
from .optimal_control import (
    OCProblem,
    OptimizationReport,
    Sense,
    compute_switching_functions,
    evaluate_mp_residual,
    singular_signature,
    solve_analytic_n2,
    solve_bang_bang,
    solve_relaxed,
)
from .problem_io import (
    build_problem,
    parse_problem_file,
    problem_to_dict,
    report_to_dict,
    write_csv_atomic,
    write_json_atomic,
)
from .reduction import default_basis, lifted_diameter, reduce_system
from .stability import ucc_decide_n3_r2, ucc_sample_check

SINGULAR_NOTE = "relaxed solver beats every searched bang-bang control"
SCREEN_DISCLAIMER = (
    "necessary-only screen: the exact decision procedure covers n=3 with "
    "two patterns; for this system only sampled hull matrices were tested"
)


def _tool_block() -> dict:
    return {"name": "consensus-opt", "version": __version__}


def parse_control_spec(
    spec: str, switch_times: Optional[str], horizon: float, r: int
) -> PiecewiseControl:
    """Build a control from CLI text.

    Two forms: "const:u1,u2,..." for a constant simplex point, or a comma
    separated list of 1-based subsystem indices with --switch-times giving
    the times between them, e.g. --control 2,1 --switch-times 0.264834.
    """
    try:
        if spec.startswith("const:"):
            u = [float(v) for v in spec[len("const:"):].split(",")]
            return PiecewiseControl.constant(u, horizon)
        indices = [int(tok) - 1 for tok in spec.split(",") if tok]
        times = []
        if switch_times:
            times = [float(tok) for tok in switch_times.split(",") if tok]
        for t in times:
            if not 0.0 <= t <= horizon:
                raise ProblemFileError(
                    f"switch time {t} outside [0, {horizon}]", "--switch-times"
                )
        return PiecewiseControl.from_vertex_sequence(indices, times, horizon, r)
    except ProblemFileError:
        raise
    except (ValueError, ConsensusOptError) as exc:
        raise ProblemFileError(f"bad control spec {spec!r}: {exc}", "--control") from exc


def _trajectory_rows(prob: OCProblem, traj, switching=None):
    """CSV header and rows: states, V, diameter, reduced diameter, reduced
    coordinates, and optionally the switching functions on the same grid."""
    n = prob.sys.n
    header = ["time"] + [f"x{i + 1}" for i in range(n)] + ["V", "diameter"]
    basis = default_basis(n) if n >= 2 else None
    if basis is not None:
        header += ["W_reduced"] + [f"z{i + 1}" for i in range(n - 1)]
    if switching is not None:
        header += [f"m{i + 1}" for i in range(prob.sys.r)]
    rows = []
    for k, t in enumerate(traj.times):
        x = traj.states[k]
        row = [t, *x, consensus_distance(x), diameter(x)]
        if basis is not None:
            z = (basis.S @ x)[1:]
            row += [lifted_diameter(z, basis), *z]
        if switching is not None:
            row += list(switching.values[k])
        rows.append(row)
    return header, rows


def _emit_csv_and_figures(args, prob, traj, report=None, switching=None):
    from . import figures

    header, rows = _trajectory_rows(prob, traj, switching)
    write_csv_atomic(args.csv, header, rows)
    written = [args.csv]
    if not args.no_figures:
        stem = figures.figure_stem(args.csv)
        v = np.array([consensus_distance(x) for x in traj.states])
        d = np.array([diameter(x) for x in traj.states])
        if prob.sys.n >= 2:
            basis = default_basis(prob.sys.n)
            w = np.array(
                [lifted_diameter((basis.S @ x)[1:], basis) for x in traj.states]
            )
        else:
            w = d
        written += figures.render_simulation_figures(
            traj.times, traj.states, v, d, w, stem
        )
        if report is not None:
            written += figures.render_optimization_figures(report, stem)
    return written


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args, tol: Tolerances) -> int:
    pf = parse_problem_file(args.problem)
    status = 0
    for i, mat in enumerate(pf.matrices):
        try:
            validate_consensus_matrix(np.array(mat), tol)
            print(f"matrix {i + 1}: ok (Metzler, zero row sums)")
        except ConsensusOptError as exc:
            print(f"matrix {i + 1}: INVALID: {exc}")
            status = 2
    if status == 0:
        print(f"{args.problem}: {len(pf.matrices)} matrices valid, n={pf.n}")
    return status


def cmd_simulate(args, tol: Tolerances) -> int:
    pf = parse_problem_file(args.problem)
    prob = build_problem(pf, tol)
    control = parse_control_spec(
        args.control, args.switch_times, prob.horizon, prob.sys.r
    )
    traj = propagate(prob.sys, prob.x0, control, args.samples, tol)
    if args.csv:
        for path in _emit_csv_and_figures(args, prob, traj):
            print(f"wrote {path}")
    else:
        header, rows = _trajectory_rows(prob, traj)
        print(",".join(header))
        for row in rows:
            print(",".join(f"{v:.17g}" for v in row))
    return 0


def cmd_reduce(args, tol: Tolerances) -> int:
    pf = parse_problem_file(args.problem)
    prob = build_problem(pf, tol)
    reduced = reduce_system(prob.sys, tol=tol)
    data = {
        "tool": _tool_block(),
        "problem": problem_to_dict(pf),
        "bar_matrices": [b.tolist() for b in reduced.bar_matrices],
        "metric": reduced.metric.tolist(),
        "basis_S": reduced.basis.S.tolist(),
        "basis_S_inv": reduced.basis.S_inv.tolist(),
    }
    if args.out:
        write_json_atomic(args.out, data)
        print(f"wrote {args.out}")
    else:
        for i, b in enumerate(reduced.bar_matrices):
            print(f"bar A{i + 1} = {b.tolist()}")
        print(f"metric M = {reduced.metric.tolist()}")
    return 0


def _solve_for_mode(prob: OCProblem, args, options, tol):
    """Run the requested solver(s); returns (selected, extras dict)."""
    max_switches = (
        args.max_switches if args.max_switches is not None else options.max_switches
    )
    grid = args.grid if args.grid is not None else options.grid
    time_bins = args.time_bins if args.time_bins is not None else options.time_bins
    extras: dict = {}
    if prob.sys.n == 2:
        selected = solve_analytic_n2(prob, tol=tol)
        extras["mode"] = "analytic"
        return selected, extras
    reports: dict = {}
    if args.mode in ("bangbang", "both"):
        reports["bang_bang"] = solve_bang_bang(
            prob, max_switches=max_switches, grid=grid, tol=tol
        )
    if args.mode in ("relaxed", "both"):
        reports["relaxed"] = solve_relaxed(prob, time_bins=time_bins, tol=tol)
    if args.mode == "both":
        bb, rel = reports["bang_bang"], reports["relaxed"]
        singular = singular_signature(bb, rel, prob.sense)
        extras["singular_signature"] = singular
        if singular:
            extras["note"] = SINGULAR_NOTE
        better = (
            rel
            if (rel.cost - bb.cost) * prob.sense.sign < 0
            else bb
        )
        selected = better
    else:
        selected = next(iter(reports.values()))
    extras["mode"] = args.mode
    extras.update(
        {name: report_to_dict(rep, include_paths=False) for name, rep in reports.items()}
    )
    return selected, extras


def _run_optimize(args, tol: Tolerances, forced_sense: Optional[Sense]) -> int:
    pf = parse_problem_file(args.problem)
    sense = forced_sense
    if sense is None and args.sense is not None:
        sense = Sense.MINIMIZE if args.sense == "min" else Sense.MAXIMIZE
    prob = build_problem(pf, tol, sense_override=sense)
    started = time.perf_counter()
    selected, extras = _solve_for_mode(prob, args, pf.options, tol)
    elapsed = time.perf_counter() - started
    data = {
        "tool": _tool_block(),
        "timing_seconds": elapsed,
        "problem": problem_to_dict(pf),
        "effective_sense": prob.sense.value,
        "seed": pf.options.seed if args.seed is None else args.seed,
        "selected": report_to_dict(selected),
        **{k: v for k, v in extras.items() if k not in ("mode",)},
        "mode": extras.get("mode"),
    }
    if args.out:
        write_json_atomic(args.out, data)
        print(f"wrote {args.out}")
    if args.csv:
        for path in _emit_csv_and_figures(
            args, prob, selected.trajectory, report=selected, switching=selected.switching
        ):
            print(f"wrote {path}")
    print(
        f"{prob.sense.value}: cost {selected.cost:.9g} by {selected.method.value}, "
        f"mp residual {selected.mp_residual:.3e}"
        + (
            f", switches at {np.round(selected.control.switch_times(), 6).tolist()}"
            if selected.control.switch_times().size
            else ", no switches"
        )
    )
    if extras.get("singular_signature"):
        print(f"singular signature: {SINGULAR_NOTE}")
    return 0


def cmd_optimize(args, tol: Tolerances) -> int:
    return _run_optimize(args, tol, forced_sense=None)


def cmd_worst_case(args, tol: Tolerances) -> int:
    return _run_optimize(args, tol, forced_sense=Sense.MAXIMIZE)


def cmd_ucc(args, tol: Tolerances) -> int:
    pf = parse_problem_file(args.problem)
    prob = build_problem(pf, tol)
    sys_ = prob.sys
    data: dict = {"tool": _tool_block(), "problem": problem_to_dict(pf)}
    if sys_.n == 3 and sys_.r == 2:
        verdict = ucc_decide_n3_r2(sys_.matrices[0], sys_.matrices[1], tol)
        data["decision"] = verdict.decision
        data["exact"] = True
        data["marginal"] = verdict.marginal
        data["notes"] = list(verdict.notes)
        if verdict.certificate is not None:
            cert = verdict.certificate
            data["certificate"] = {
                "hull_quadratic": list(cert.hull_quadratic),
                "segment_hurwitz": cert.segment_hurwitz,
                "inverse_segment_hurwitz": cert.inverse_segment_hurwitz,
                "reduced_pair": [b.tolist() for b in cert.reduced_pair],
                "cqlf_Y": cert.cqlf.Y.tolist() if cert.cqlf else None,
                "cqlf_residuals": list(cert.cqlf.residuals) if cert.cqlf else None,
            }
            print(f"UCC: yes (exact decision){' [marginal]' if verdict.marginal else ''}")
        else:
            data["counterexample_alpha"] = verdict.counterexample_alpha
            print(
                f"UCC: no; constant mixture alpha = {verdict.counterexample_alpha:.6g} "
                "has no rooted-out branching"
            )
    else:
        screen = ucc_sample_check(sys_, hull_samples=args.hull_samples, tol=tol)
        data["decision"] = (
            "NoObstruction" if screen.obstruction_free else "FailureAt"
        )
        data["exact"] = False
        data["disclaimer"] = SCREEN_DISCLAIMER
        data["samples_checked"] = screen.samples_checked
        if screen.failure_weights is not None:
            data["failure_weights"] = list(screen.failure_weights)
            print(f"screen: obstruction at hull weights {screen.failure_weights}")
        else:
            print(f"screen: no obstruction in {screen.samples_checked} samples")
        print(SCREEN_DISCLAIMER)
    if args.out:
        write_json_atomic(args.out, data)
        print(f"wrote {args.out}")
    return 0


def cmd_mp_verify(args, tol: Tolerances) -> int:
    pf = parse_problem_file(args.problem)
    sense = None
    if args.sense is not None:
        sense = Sense.MINIMIZE if args.sense == "min" else Sense.MAXIMIZE
    prob = build_problem(pf, tol, sense_override=sense)
    control = parse_control_spec(
        args.control, args.switch_times, prob.horizon, prob.sys.r
    )
    _, sw = compute_switching_functions(prob, control, args.samples, tol)
    residual = evaluate_mp_residual(control, sw, prob.sense, tol)
    bound = 1e-4 * prob.horizon * sw.sup_norm()
    consistent = residual <= bound
    print(f"mp residual: {residual:.6e}")
    print(f"bound (1e-4 * T * sup|m|): {bound:.6e}")
    print("verdict: consistent" if consistent else "verdict: VIOLATES first-order conditions")
    if args.out:
        write_json_atomic(
            args.out,
            {
                "tool": _tool_block(),
                "problem": problem_to_dict(pf),
                "effective_sense": prob.sense.value,
                "mp_residual": residual,
                "bound": bound,
                "consistent": consistent,
                "switching_sup_norm": sw.sup_norm(),
            },
        )
        print(f"wrote {args.out}")
    return 0


def cmd_paper_examples(args, tol: Tolerances) -> int:
    from .reference_examples import run_reference_suite

    try:
        rows = run_reference_suite(only=args.only, tol=tol)
    except KeyError as exc:
        raise ProblemFileError(str(exc.args[0]), "--only") from exc
    widths = [
        max(len(r.fixture) for r in rows),
        max(len(r.quantity) for r in rows),
        max(len(r.expected) for r in rows),
        max(len(r.actual) for r in rows),
        max(len(r.tolerance) for r in rows),
    ]
    header = ["fixture", "quantity", "expected", "actual", "tol", "status"]
    widths = [max(w, len(h)) for w, h in zip(widths, header[:5])]
    fmt = "  ".join("{:<%d}" % w for w in widths) + "  {}"
    print(fmt.format(*header))
    failures = 0
    for r in rows:
        status = "pass" if r.passed else "FAIL"
        failures += 0 if r.passed else 1
        print(fmt.format(r.fixture, r.quantity, r.expected, r.actual, r.tolerance, status))
    print(f"{len(rows) - failures}/{len(rows)} checks passed")
    return 0 if failures == 0 else 3


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def _add_problem_arg(p):
    p.add_argument("problem", help="path to a problem JSON file")


def _add_control_args(p):
    p.add_argument(
        "--control",
        required=True,
        help="control spec: 1-based subsystem sequence '2,1' or 'const:0.5,0.5'",
    )
    p.add_argument(
        "--switch-times", default=None, help="comma separated switch times"
    )
    p.add_argument("--samples", type=int, default=32, help="samples per segment")


def _add_solver_args(p):
    p.add_argument("--mode", choices=("bangbang", "relaxed", "both"), default="both")
    p.add_argument("--out", default=None, help="write the JSON run report here")
    p.add_argument("--csv", default=None, help="write the trajectory CSV here")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.add_argument("--max-switches", type=int, default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--time-bins", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensus-opt",
        description="Optimal and worst-case switching for consensus networks",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check matrices in a problem file")
    _add_problem_arg(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="propagate a given control, emit CSV")
    _add_problem_arg(p)
    _add_control_args(p)
    p.add_argument("--csv", default=None, help="write the trajectory CSV here")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reduce", help="emit the reduced system and metric")
    _add_problem_arg(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("optimize", help="solve for the best or worst switching")
    _add_problem_arg(p)
    _add_solver_args(p)
    p.add_argument("--sense", choices=("min", "max"), default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("worst-case", help="alias: optimize with sense forced to max")
    _add_problem_arg(p)
    _add_solver_args(p)
    p.set_defaults(func=cmd_worst_case, sense=None)

    p = sub.add_parser("ucc", help="decide uniform convergence to consensus")
    _add_problem_arg(p)
    p.add_argument("--hull-samples", type=int, default=64)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ucc)

    p = sub.add_parser("mp-verify", help="check a control against the optimality conditions")
    _add_problem_arg(p)
    _add_control_args(p)
    p.add_argument("--sense", choices=("min", "max"), default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mp_verify)

    p = sub.add_parser("paper-examples", help="run the bundled reference fixtures")
    p.add_argument("--only", default=None, help="run a single fixture by name")
    p.set_defaults(func=cmd_paper_examples)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        tol = tolerances_from_env()
    except (OSError, ValueError) as exc:
        print(f"error: bad tolerance file: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args, tol)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConsensusOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
