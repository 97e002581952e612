"""Proximal solvers for multispectral phase retrieval.

The core is a small nonconvex problem, ``min (x^T x - b)^2 + (x - u)^T diag(sigma) (x - u)``,
to which each complex prox subproblem reduces after a spectral change of
variables.  ``solve`` minimizes it; ``canonicalize`` / ``lift_solution`` move
between the complex and canonical forms; ``admm_solve`` combines many terms.
"""

from ._backend import BACKEND
from .admm import (
    AdmmOptions,
    AdmmResult,
    AdmmState,
    MultispectralProblem,
    ProxSolveError,
    admm_solve,
    precompute,
    prox_term,
    random_problem,
)
from .canonical import (
    BoundsCase,
    CanonicalInstance,
    OptimalityCertificate,
    SolutionBounds,
    certify,
    gradient,
    hessian_dense,
    objective,
    solution_bounds,
    warm_start,
)
from .recast import (
    ComplexProxInstance,
    RecastMap,
    SpectralFactor,
    build_real_stack,
    canonicalize,
    canonicalize_center,
    complex_objective,
    lift_solution,
    spectral_factor,
)
from .solver import (
    FallbackRequired,
    Init,
    Method,
    SolveReport,
    SolverOptions,
    StepRule,
    Termination,
    newton_direction_dense,
    optimal_step,
    random_init,
    sm_newton_direction,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AdmmOptions",
    "AdmmResult",
    "AdmmState",
    "BoundsCase",
    "CanonicalInstance",
    "ComplexProxInstance",
    "FallbackRequired",
    "Init",
    "Method",
    "MultispectralProblem",
    "OptimalityCertificate",
    "ProxSolveError",
    "RecastMap",
    "SolutionBounds",
    "SolveReport",
    "SolverOptions",
    "SpectralFactor",
    "StepRule",
    "Termination",
    "admm_solve",
    "build_real_stack",
    "canonicalize",
    "canonicalize_center",
    "certify",
    "complex_objective",
    "gradient",
    "hessian_dense",
    "lift_solution",
    "newton_direction_dense",
    "objective",
    "optimal_step",
    "precompute",
    "prox_term",
    "random_problem",
    "random_init",
    "sm_newton_direction",
    "solution_bounds",
    "solve",
    "spectral_factor",
    "warm_start",
]
