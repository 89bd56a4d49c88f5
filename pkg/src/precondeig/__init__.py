"""precondeig: preconditioned eigensolvers on the sphere with diagnostics.

Targets the smallest eigenpair of an SPD matrix (or SPD pencil) with
preconditioned iterations, and quantifies preconditioner quality through
spectral equivalence and the distortion angle at the target eigenvector.
"""

from . import errors
from .diagnostics import (
    PrecondQuality,
    RateContext,
    a_x,
    build_rate_context,
    check_initial,
    compute_quality,
    cos_phi_direct,
    cos_phi_variational,
    gamma_x,
    kappa_nu,
    mu_x,
    success_probability,
    theta_shao,
    validate_properties,
    xi_inf,
    xi_t,
)
from .geometry import (
    IterateState,
    dist_b,
    f_value,
    grad_norm_sq,
    make_state,
    rayleigh,
    sphere_dist,
    sphere_exp,
    sphere_log,
)
from .linalg import (
    CholFactor,
    Rng,
    chol_solve,
    cholesky,
    dense_sym_eig,
    gaussian_vector,
    lanczos_extremal,
    pcg,
)
from .mmio import read_matrix, write_dense, write_sparse
from .precond import (
    DdmPreconditioner,
    Preconditioner,
    apply_fwd_iterative,
    epsilon_l,
    make_ddm,
    make_exact,
    make_identity,
    make_mp_cholesky,
    make_spd,
    spectral_scale,
)
from .problems import (
    EigenProblem,
    KernelSpec,
    MeshHierarchy,
    fd_eigenvalue,
    fem_p1,
    generalized_reduce,
    kernel_matrix,
    laplace_fd,
    laplace_fem,
    mesh_hierarchy,
    reference_eigs,
)
from .solvers import SolveResult, StepPolicy, Trace, pinvit_classic_solve, rsd_solve

__version__ = "0.1.0"

__all__ = [
    "CholFactor",
    "DdmPreconditioner",
    "EigenProblem",
    "IterateState",
    "KernelSpec",
    "MeshHierarchy",
    "PrecondQuality",
    "Preconditioner",
    "RateContext",
    "Rng",
    "SolveResult",
    "StepPolicy",
    "Trace",
    "a_x",
    "apply_fwd_iterative",
    "build_rate_context",
    "check_initial",
    "chol_solve",
    "cholesky",
    "compute_quality",
    "cos_phi_direct",
    "cos_phi_variational",
    "dense_sym_eig",
    "dist_b",
    "epsilon_l",
    "errors",
    "f_value",
    "fd_eigenvalue",
    "fem_p1",
    "gamma_x",
    "gaussian_vector",
    "generalized_reduce",
    "grad_norm_sq",
    "kappa_nu",
    "kernel_matrix",
    "lanczos_extremal",
    "laplace_fd",
    "laplace_fem",
    "make_ddm",
    "make_exact",
    "make_identity",
    "make_mp_cholesky",
    "make_spd",
    "make_state",
    "mesh_hierarchy",
    "mu_x",
    "pcg",
    "pinvit_classic_solve",
    "rayleigh",
    "read_matrix",
    "reference_eigs",
    "rsd_solve",
    "spectral_scale",
    "sphere_dist",
    "sphere_exp",
    "sphere_log",
    "success_probability",
    "theta_shao",
    "validate_properties",
    "write_dense",
    "write_sparse",
    "xi_inf",
    "xi_t",
]
