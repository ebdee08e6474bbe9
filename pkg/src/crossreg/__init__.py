"""Cross approximation plus general-form Tikhonov regularization.

Solves large linear discrete ill-posed problems from an entry oracle: a
greedy cross approximation builds a low-rank skeleton of the matrix, a
sampled probe set estimates the approximation error on-line, and the
regularized solution and stopping rank come from a discrepancy-style test
on the reduced k x k problem.
"""

from .aca import AcaModel, ErrorEstimate, ProbeSet, RankExhausted, estimate_error, init, materialize, step
from .core import BACKEND
from .linalg import QrFactors, SingularTriangular, SvdFactors, qr_skinny, svd_small, tri_solve
from .oracle import EntryOracle, EvalCounter, dense_oracle, grid_kernel_oracle, kron_oracle
from .problems import (
    ProblemCore,
    ProblemInstance,
    add_noise,
    baart,
    baart2d,
    get_problem,
    gravity,
    phillips,
)
from .regularizers import RegMatrix, build, build_kron
from .solver import (
    IllConditionedRl,
    NoRootAboveRange,
    NoRootBelowRange,
    ReducedSystem,
    SolverResult,
    StopDecision,
    TikhonovSolution,
    discrepancy_root,
    factorize,
    run_solver,
    solve_for_mu,
    stopping_check,
)

__version__ = "0.1.0"

__all__ = [
    "AcaModel",
    "BACKEND",
    "EntryOracle",
    "ErrorEstimate",
    "EvalCounter",
    "IllConditionedRl",
    "NoRootAboveRange",
    "NoRootBelowRange",
    "ProbeSet",
    "ProblemCore",
    "ProblemInstance",
    "QrFactors",
    "RankExhausted",
    "ReducedSystem",
    "RegMatrix",
    "SingularTriangular",
    "SolverResult",
    "StopDecision",
    "SvdFactors",
    "TikhonovSolution",
    "add_noise",
    "baart",
    "baart2d",
    "build",
    "build_kron",
    "dense_oracle",
    "discrepancy_root",
    "estimate_error",
    "factorize",
    "get_problem",
    "gravity",
    "grid_kernel_oracle",
    "init",
    "kron_oracle",
    "materialize",
    "phillips",
    "qr_skinny",
    "run_solver",
    "solve_for_mu",
    "step",
    "stopping_check",
    "svd_small",
    "tri_solve",
]
