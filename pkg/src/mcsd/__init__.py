"""Steepest descent on the Stiefel manifold via norm-ball LMOs.

Core pieces: dense polar-factor kernels (exact and iterative), the Stiefel
manifold with its projection retraction, linear minimization oracles for
the Frobenius and spectral norms, the weighted-PCA (Brockett) objective
family, four optimizers over a common stepping interface, run-time
verification of the descent and convergence bounds, and a benchmark CLI.
"""

from .errors import (
    ConfigurationError,
    FeasibilityError,
    NumericError,
    RankDeficiencyError,
    ZeroGradient,
)
from .linalg import (
    EXACT,
    NEWTON_SCHULZ,
    MatrixNorms,
    PolarMode,
    PolarScheme,
    SvdFactors,
    frob_inner,
    matmul,
    msign_exact,
    msign_iterative,
    norms,
    spectral_norm,
    svd,
    sym,
)
from .lmo import NormKind, dual_norm, lmo, norm_equiv_constant, zero_tolerance
from .manifolds import (
    StiefelManifold,
    StiefelPoint,
    feasibility_violation,
    project,
    random_point,
    riemannian_grad,
    tangent_project,
)
from .objectives import (
    BrockettInstance,
    NoiseConfig,
    Objective,
    SmoothnessConstants,
    brockett_grad,
    brockett_value,
    load_instance,
    make_brockett,
    save_instance,
    smoothness_constants,
    stochastic_grad,
    subspace_error,
)
from .optimizers import (
    STEP_RADIUS,
    ManifoldMuon,
    Mcsd,
    Method,
    MuonDirectionResult,
    OptimizerRun,
    Rgd,
    StepInfo,
    StepSchedule,
    StochasticMcsd,
    constant_schedule,
    deterministic_bound_schedule,
    make_schedule,
    manifold_muon_direction,
    manifold_muon_step,
    mcsd_step,
    method_norm,
    periodic_decay_schedule,
    rgd_step,
    run_trace,
    step,
    stochastic_bound_schedule,
    stochastic_mcsd_step,
)
from .trace import CSV_COLUMNS, TraceRecord, read_trace_csv, write_trace_csv
from .verify import (
    BoundReport,
    audit_deterministic_bound,
    audit_per_step_descent,
    brute_force_lmo_check,
    check_descent_lemma,
    check_min_grad_rate,
    gap_with_headroom,
)

__version__ = "0.1.0"
