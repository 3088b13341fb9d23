"""Matrix concentration bounds for finite-state Markov chains.

Exact Poisson-equation solvers, long-run variance machinery, closed-form
bound evaluators with an explicit constants registry, and Monte Carlo /
exhaustive verification of every inequality at desk scale.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .apps import (
    CovPcaResult,
    VectorFunctionTable,
    covariance_experiment,
    pca_experiment,
    schur_envelope_check,
)
from .bounds import (
    DEFAULT_REGISTRY,
    BoundInput,
    BoundReport,
    ConstantsRegistry,
    bennett_tail,
    bernstein_rhs,
    crude_rosenthal_rhs,
    dimension_factor,
    geo_v_rosenthal_rhs,
    good_lambda_params,
    hoeffding_rhs,
    markov_rosenthal_rhs,
    rosenthal_burkholder_rhs,
)
from .chains import (
    ErgodicityProfile,
    FiniteChain,
    MatrixFunctionTable,
    center_and_norms,
    mixing_time,
    sample_path,
    stationary_distribution,
    tv_distance,
    v_ergodicity_kappa,
)
from .linalg import (
    HermitianMatrix,
    PsdCheckResult,
    RectMatrix,
    effective_rank,
    eig_clamp,
    hermitian_dilation,
    loewner_leq,
    spectral_norm,
)
from .poisson import (
    PoissonSolution,
    RectLongRunProxy,
    blocked_solution,
    long_run_variance_rect,
    solve_poisson,
)
from .simulate import (
    EmpiricalMoment,
    TrajectoryStats,
    empirical_lp,
    simulate_martingale,
    simulate_sums,
    synth_symmetric_martingale,
)
from .verify import (
    DiscreteJointCase,
    VerificationReport,
    append_ledger,
    check_bennett_empirical,
    check_good_lambda,
    check_inequality,
    check_symmetrization,
    check_truncated_phi,
    check_tv_integral_bound,
)

__all__ = [name for name in dir() if not name.startswith("_")]
