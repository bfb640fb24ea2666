"""Conditional logit estimation on normalized covariates with exact recovery
of raw-scale coefficients and covariance."""

from .errors import (
    ContractViolation,
    DegenerateSample,
    EmptySample,
    ImplicitIntercept,
    NonFiniteLikelihood,
    NonFiniteProbability,
    NormLogitError,
    RankDeficient,
    SingularInformation,
    ZeroColumn,
    ZeroNormalizer,
)
from .model import (
    NAIVE,
    OUTSIDE,
    STABILIZED,
    Alternative,
    ChoiceDataset,
    ChoiceTask,
    Coefficients,
    choice_probabilities,
    log_likelihood,
    log_likelihood_gradient,
    observed_information,
    utility,
)
from .normalize import (
    DenormalizedEstimates,
    NormalizationSpec,
    apply_centered_scaling,
    apply_scaling,
    denormalize_centered,
    denormalize_cov_centered,
    denormalize_cov_scaling,
    denormalize_scaling,
    derive_normalization,
    hadamard_associativity_check,
    varmax,
)
from .optimize import FitOptions, FitResult, fit, rank_check
from .simulate import (
    CovariateSpec,
    MonteCarloResult,
    SimulationConfig,
    draw_gumbel,
    equivalence_experiment,
    generate_dataset,
    run_monte_carlo,
)
from .stats import DensityCurve, KsResult, kde, ks_two_sample

__version__ = "0.1.0"
