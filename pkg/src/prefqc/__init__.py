"""Attentiveness estimation and quality filtering for preference data.

Binary preference labels from a pool of annotators are modeled with one
latent attentiveness score per user: fully attentive users follow the
population preference, fully casual ones flip coins, and everyone else sits
on the line between. The package fits the attentiveness distribution by EM,
turns the fit into per-user posteriors, and filters datasets down to the
labels of users worth trusting.
"""

from .em import (
    BoxOnMu,
    ClampEvent,
    DegenerateComponentError,
    EmConfig,
    FitReport,
    GridPosterior,
    LikelihoodDecreaseError,
    LogPriorOnMu,
    TrajectoryPoint,
    TwoPointPosterior,
    em_fit,
    fit_logistic_normal_mixture,
    m_step_beta,
    m_step_mu,
    m_step_two_point,
    posterior_grid,
    posterior_two_point,
)
from .filtering import (
    FilterDecision,
    FilteredDataset,
    MissingDecisionError,
    PosteriorSummary,
    TailProbability,
    Threshold,
    TopFraction,
    classify_attentive,
    filter_dataset,
    recovery_accuracy,
    relative_error,
    select_users,
    summarize_posterior,
)
from .io import ParseError
from .model import (
    AnnotationRecord,
    BetaPrior,
    LogisticNormalMixturePrior,
    ModelParams,
    TwoPointPrior,
    UserHistory,
    bernoulli_response_prob,
    histories_from_records,
    loglik_from_counts,
    obs_loglik,
    observed_loglik,
    prior_log_masses,
    suff_stats,
    user_loglik,
)
from .numerics import (
    BetaSolution,
    QuadratureGrid,
    SolverError,
    digamma,
    log_beta,
    log_sum_exp,
    solve_beta_system,
)
from .simulate import (
    BetaMixture,
    BetaPerItemP,
    DiscreteMasses,
    LogisticNormal,
    MuEstimate,
    ScoredPair,
    SimulationScenario,
    estimate_mu,
    list_presets,
    misspecification_suite,
    prior_mean,
    prior_quantile,
    sample_eta,
    scenario_preset,
    simulate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "BetaMixture",
    "BetaPerItemP",
    "BetaPrior",
    "BetaSolution",
    "BoxOnMu",
    "ClampEvent",
    "DegenerateComponentError",
    "DiscreteMasses",
    "EmConfig",
    "FilterDecision",
    "FilteredDataset",
    "FitReport",
    "GridPosterior",
    "LikelihoodDecreaseError",
    "LogPriorOnMu",
    "LogisticNormal",
    "LogisticNormalMixturePrior",
    "MissingDecisionError",
    "ModelParams",
    "MuEstimate",
    "ParseError",
    "PosteriorSummary",
    "QuadratureGrid",
    "ScoredPair",
    "SimulationScenario",
    "SolverError",
    "TailProbability",
    "Threshold",
    "TopFraction",
    "TrajectoryPoint",
    "TwoPointPosterior",
    "TwoPointPrior",
    "UserHistory",
    "bernoulli_response_prob",
    "classify_attentive",
    "digamma",
    "em_fit",
    "estimate_mu",
    "filter_dataset",
    "fit_logistic_normal_mixture",
    "histories_from_records",
    "list_presets",
    "log_beta",
    "log_sum_exp",
    "loglik_from_counts",
    "m_step_beta",
    "m_step_mu",
    "m_step_two_point",
    "misspecification_suite",
    "obs_loglik",
    "observed_loglik",
    "posterior_grid",
    "posterior_two_point",
    "prior_log_masses",
    "prior_mean",
    "prior_quantile",
    "recovery_accuracy",
    "relative_error",
    "sample_eta",
    "scenario_preset",
    "select_users",
    "simulate_dataset",
    "solve_beta_system",
    "suff_stats",
    "summarize_posterior",
    "user_loglik",
]
