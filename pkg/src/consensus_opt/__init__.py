"""Switched linear consensus networks: simulation, optimal and worst-case
switching synthesis, dimension reduction, and convergence certification."""

__version__ = "0.1.0"

from .config import DEFAULT_TOLERANCES, Tolerances, load_tolerances
from .core import (
    ConsensusMatrix,
    SwitchedSystem,
    average,
    consensus_distance,
    diameter,
    disagreement_vector,
    permute_system,
    projection_matrix,
    switched_system,
    validate_consensus_matrix,
)
from .dynamics import (
    AdjointPath,
    PiecewiseControl,
    Trajectory,
    matrix_exponential,
    propagate,
    propagate_adjoint,
    propagate_general,
    system_matrix,
)
from .optimal_control import (
    OCProblem,
    OptimizationReport,
    ReducedMP,
    Sense,
    SolveMethod,
    SwitchingFunctionPath,
    compute_reduced_mp,
    compute_switching_functions,
    constant_control_scan,
    evaluate_mp_residual,
    n2_closed_form_cost,
    singular_signature,
    solve_analytic_n2,
    solve_bang_bang,
    solve_relaxed,
)
from .reduction import (
    ReducedSystem,
    ReductionBasis,
    basis_from_matrix,
    default_basis,
    lifted_diameter,
    metric_norm_sq,
    reduce_state,
    reduce_system,
)
from .stability import (
    CQLFNotFound,
    HullBranchingResult,
    HullScreenResult,
    QuadraticCertificate,
    UCCCertificate,
    UCCVerdict,
    WeightedDigraph,
    cqlf_search,
    digraph_of,
    has_rooted_out_branching,
    hull_branching_check_n3,
    hurwitz_segment_2x2,
    lyapunov_residuals,
    ucc_decide_n3_r2,
    ucc_sample_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
