"""
Model averaging over orthogonal bases: Mallows-weighted averages of subset
least-squares fits, the dimension-adaptive hypercube average, thresholding
rules, exact oracle risks, and a seeded simulation harness.
"""

__version__ = "0.1.0"

from .baselines import CVFit, LassoConvergenceError, lasso_cv_fit, lasso_fit, ridge_cv_fit, ridge_fit
from .candidates import (
    CandidateSet,
    CapacityError,
    ShrinkageProfile,
    build_all_nested,
    build_group_blocks,
    build_univariate,
    custom_set,
    enumerate_all_subsets,
    group_block_boundaries,
    shrinkage_profile,
)
from .estimators import (
    FitResult,
    HypercubeWeights,
    PenaltySpec,
    adap_fit,
    estimate_sigma2,
    hard_threshold_fit,
    mallows_criterion,
    mma_fit,
    soft_threshold_fit,
)
from .risk import (
    RiskReport,
    loss_of_fit,
    minimax_ratio_denominator,
    optimal_all_subset_risk,
    optimal_ma_risk,
    risk_of_profile,
    risk_of_weights,
)
from .simplex_qp import (
    ConvergenceError,
    NotPSDError,
    ProjectorSet,
    QPSolution,
    QuadraticProgram,
    SimplexWeights,
    assemble_mallows_qp,
    assemble_risk_qp,
    grid_search_simplex,
    solve_simplex_qp,
)
from .spectral import (
    CanonicalBasis,
    DimensionError,
    MeanSpec,
    OrthoBasis,
    ResponseSample,
    SpectralCoefs,
    basis_from_svd,
    canonical_basis,
    reconstruct,
    spectral_transform,
    validate_basis,
)
