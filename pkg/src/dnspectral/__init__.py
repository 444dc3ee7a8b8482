"""Spectral solver for a time-fractional diffusion equation with nonlocal
boundary conditions: special-function kernels, fractional operators, the
bi-orthogonal eigenfunction system, forward and backward source solvers,
and independent verification oracles."""

from .backward_solver import (
    BackwardProblem,
    SourceRecovery,
    amplification_factor,
    check_psi_compatibility,
    recover_source,
)
from .fde_core import ModeParams, u0_mode, u1_mode, u2_mode
from .forward_solver import (
    ForwardProblem,
    ForwardSolution,
    SolutionField,
    check_compatibility,
    evaluate,
    solve_forward,
)
from .fractional_ops import (
    DNMultiOrder,
    SampledFunction,
    dn_apply,
    fundamental_relation_residual,
    rl_derivative,
    rl_integral,
    rl_monomial,
)
from .spectral_basis import (
    BasisId,
    SpectralCoeffs,
    decay_bound,
    eigenvalue,
    eval_adjoint,
    eval_eigenfunction,
    project,
    reconstruct,
)
from .special_functions import (
    MLIndex,
    MLTFSpec,
    PowerKernel,
    gamma,
    ml_eval,
    mltf_convolve,
    mltf_eval,
)
from .verification import (
    ResidualReport,
    boundary_residual,
    heat_oracle,
    initial_residual,
    pde_residual,
)

__version__ = "0.1.0"
