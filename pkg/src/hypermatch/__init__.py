"""Third-order hypergraph matching by block-coordinate ascent on multilinear forms."""

from .affinity import (
    AffinityConfig,
    MatchProblem,
    PointSet,
    SyntheticConfig,
    accuracy,
    avg_gain,
    build_pairwise,
    build_tensor,
    gen_synthetic,
)
from .errors import HypermatchError
from .estimator import HypergraphMatcher
from .lap import AssignmentVec, argmax_over_M, solve_lap
from .modform import ModifiedForm, alpha_bound, alpha_threshold
from .qap import QapOperator, psi_ipfp, psi_mpm, solve_qap
from .solvers import (
    ALGORITHMS,
    SolverConfig,
    SolverResult,
    adapt_bcagm3,
    adapt_bcagm3_psi,
    bcagm3,
    bcagm3_psi,
    lifted4_solve,
    solve,
)
from .tensor3 import ProblemDims, SparseTensor3, canonicalize, eval_form, read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AffinityConfig",
    "AssignmentVec",
    "HypergraphMatcher",
    "HypermatchError",
    "MatchProblem",
    "ModifiedForm",
    "PointSet",
    "ProblemDims",
    "QapOperator",
    "SolverConfig",
    "SolverResult",
    "SparseTensor3",
    "SyntheticConfig",
    "accuracy",
    "adapt_bcagm3",
    "adapt_bcagm3_psi",
    "alpha_bound",
    "alpha_threshold",
    "argmax_over_M",
    "avg_gain",
    "bcagm3",
    "bcagm3_psi",
    "build_pairwise",
    "build_tensor",
    "canonicalize",
    "eval_form",
    "gen_synthetic",
    "lifted4_solve",
    "psi_ipfp",
    "psi_mpm",
    "read_tensor",
    "solve",
    "solve_lap",
    "solve_qap",
    "write_tensor",
]
