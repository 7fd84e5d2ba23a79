"""Posterior contraction and kernel-smoothing concentration experiments for
Gaussian process regression with a rescaled squared-exponential prior.
"""
from .concentration import (
    BorellBudget,
    CenteringCheck,
    TailPair,
    TalagrandBudget,
    centering_check,
    design_process_deviation,
    exact_design_mean_n2,
    noise_process_deviation,
)
from .kernels import (
    FactorizationError,
    GramFactor,
    L2BoundCheck,
    RkhsElement,
    SEKernel,
    SpectralDensity,
    gram,
    jittered_cholesky,
    l2_bound_check,
    random_expansion,
)
from .posterior import (
    ContractionEstimate,
    PosteriorModel,
    contraction_mass,
    fit,
    l1q_distance,
)
from .quadrature import QuadratureGrid, default_grid
from .rates import (
    ExperimentAborted,
    PhiErrorSummary,
    RateCell,
    RateFit,
    RatePlan,
    RateResult,
    Schedule,
    calibrate_m,
    contraction_rate,
    estimator_bandwidth,
    fit_rate,
    mismatched_contraction_rate,
    phi_error_rates,
    prior_bandwidth,
    run_rate_experiment,
)
from .smoothing import (
    CertificateError,
    FlatTopKernel,
    KernelCertificates,
    SmootherConfig,
    SmoothingResidual,
    build_psi,
    empirical_smooth,
    kernel_estimate,
    population_smooth,
    separation_test,
    smoothing_bias_l1,
    smoothing_residual,
    spectral_profile,
)
from .synth import (
    CovariateDensity,
    Dataset,
    TrueFunction,
    gen_dataset,
    make_truth,
    sample_design,
)

__version__ = "0.1.0"

__all__ = [
    "BorellBudget",
    "CenteringCheck",
    "CertificateError",
    "ContractionEstimate",
    "CovariateDensity",
    "Dataset",
    "ExperimentAborted",
    "FactorizationError",
    "FlatTopKernel",
    "GramFactor",
    "KernelCertificates",
    "L2BoundCheck",
    "PhiErrorSummary",
    "PosteriorModel",
    "QuadratureGrid",
    "RateCell",
    "RateFit",
    "RatePlan",
    "RateResult",
    "RkhsElement",
    "Schedule",
    "SEKernel",
    "SmootherConfig",
    "SmoothingResidual",
    "SpectralDensity",
    "TailPair",
    "TalagrandBudget",
    "TrueFunction",
    "build_psi",
    "calibrate_m",
    "centering_check",
    "contraction_mass",
    "contraction_rate",
    "default_grid",
    "design_process_deviation",
    "empirical_smooth",
    "estimator_bandwidth",
    "exact_design_mean_n2",
    "fit",
    "fit_rate",
    "gen_dataset",
    "gram",
    "jittered_cholesky",
    "kernel_estimate",
    "l1q_distance",
    "l2_bound_check",
    "make_truth",
    "mismatched_contraction_rate",
    "noise_process_deviation",
    "phi_error_rates",
    "population_smooth",
    "prior_bandwidth",
    "random_expansion",
    "run_rate_experiment",
    "sample_design",
    "separation_test",
    "smoothing_bias_l1",
    "smoothing_residual",
    "spectral_profile",
]
