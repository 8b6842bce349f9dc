"""Entropy-regularized inverse reinforcement learning on tabular MDPs.

The package is organized around a small set of frozen dataclasses (MDPs,
policies, trajectory datasets, linear reward models) and pure functions that
transform them: soft backward induction, occupancy propagation, loss and
derivative evaluation, a damped-Newton fitter, and experiment drivers for
rate, geometry, and concentration studies.
"""

from .errors import (
    CapacityError,
    DimensionError,
    DomainError,
    EmptyDatasetError,
    InputError,
    InvariantError,
    SoftIrlError,
)
from .experiments import (
    ConcentrationReport,
    GeometryCheck,
    GeometryCheckReport,
    Instance,
    InstanceSpec,
    RateConfig,
    RateRecord,
    RateReport,
    RATE_METRICS,
    SLOPE_METRICS,
    check_concentration,
    check_local_geometry,
    chi,
    dikin_boundary_pair,
    generate_instance,
    psi,
    run_rate_experiment,
)
from .instances import (
    BUILTIN_NAMES,
    builtin_mdp_reward,
    counterexample_instance,
    deterministic_chain_instance,
    zero_reward_instance,
)
from .linear_reward import (
    DerivativeBundle,
    EffectiveDimension,
    FeatureMap,
    GeometryConstants,
    LinearRewardModel,
    batch_scores,
    derivative_bundle,
    effective_dimension,
    geometry_constants,
    grad_J,
    hessian_J,
    kernel_basis,
    max_cumulative_feature_norm,
    max_score_norm,
    reward_of,
    score,
    shaping_projector,
    solve_model,
    third_derivative,
)
from .losses import (
    NonconvexityReport,
    RiskReport,
    equivalence_report,
    irl_empirical_loss,
    irl_population_loss,
    mle_loss,
    mle_population_loss,
    nonconvexity_probe,
    soft_optimal_residuals,
)
from .mdp import (
    DEFAULT_ENUMERATION_CAP,
    Dataset,
    Mdp,
    OccupancyMeasures,
    Policy,
    Trajectory,
    batch_trajectory_probs,
    empirical_feature_expectation,
    enumerate_support,
    enumerate_trajectories,
    feature_expectation,
    forward_occupancy,
    sample_trajectories,
    trajectory_log_prob,
    uniform_policy,
)
from .opt import (
    FitConfig,
    IrlFitResult,
    IterationRecord,
    fit_empirical,
    fit_population,
    newton_decrement,
)
from .soft_dp import (
    HardSolution,
    PolicyEvaluation,
    ReturnDecomposition,
    RewardTable,
    SoftSolution,
    VarianceDecomposition,
    advantage_vector,
    delta_terms,
    feature_advantage,
    feature_values,
    gather_table,
    hard_backward,
    log_policy_density,
    policy_evaluate,
    return_decomposition,
    soft_backward,
    trajectory_hellinger,
    trajectory_kl,
    variance_decomposition,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES",
    "CapacityError",
    "ConcentrationReport",
    "DEFAULT_ENUMERATION_CAP",
    "Dataset",
    "DerivativeBundle",
    "DimensionError",
    "DomainError",
    "EffectiveDimension",
    "EmptyDatasetError",
    "FeatureMap",
    "FitConfig",
    "GeometryCheck",
    "GeometryCheckReport",
    "GeometryConstants",
    "HardSolution",
    "InputError",
    "Instance",
    "InstanceSpec",
    "InvariantError",
    "IrlFitResult",
    "IterationRecord",
    "LinearRewardModel",
    "Mdp",
    "NonconvexityReport",
    "OccupancyMeasures",
    "Policy",
    "PolicyEvaluation",
    "RATE_METRICS",
    "RateConfig",
    "RateRecord",
    "RateReport",
    "ReturnDecomposition",
    "RewardTable",
    "RiskReport",
    "SLOPE_METRICS",
    "SoftIrlError",
    "SoftSolution",
    "Trajectory",
    "VarianceDecomposition",
    "advantage_vector",
    "batch_scores",
    "batch_trajectory_probs",
    "builtin_mdp_reward",
    "check_concentration",
    "check_local_geometry",
    "chi",
    "counterexample_instance",
    "delta_terms",
    "derivative_bundle",
    "deterministic_chain_instance",
    "dikin_boundary_pair",
    "effective_dimension",
    "empirical_feature_expectation",
    "enumerate_support",
    "enumerate_trajectories",
    "equivalence_report",
    "feature_advantage",
    "feature_expectation",
    "feature_values",
    "fit_empirical",
    "fit_population",
    "forward_occupancy",
    "gather_table",
    "generate_instance",
    "geometry_constants",
    "grad_J",
    "hard_backward",
    "hessian_J",
    "irl_empirical_loss",
    "irl_population_loss",
    "kernel_basis",
    "log_policy_density",
    "max_cumulative_feature_norm",
    "max_score_norm",
    "mle_loss",
    "mle_population_loss",
    "newton_decrement",
    "nonconvexity_probe",
    "policy_evaluate",
    "psi",
    "return_decomposition",
    "reward_of",
    "run_rate_experiment",
    "sample_trajectories",
    "score",
    "shaping_projector",
    "soft_backward",
    "soft_optimal_residuals",
    "solve_model",
    "third_derivative",
    "trajectory_hellinger",
    "trajectory_kl",
    "trajectory_log_prob",
    "uniform_policy",
    "variance_decomposition",
    "zero_reward_instance",
]
