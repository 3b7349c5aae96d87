"""Differentially private posterior sampling via tempered particle filters.

The package splits into focused modules: addressable random streams
(`streams`), prior/likelihood building blocks (`distributions`), privacy
mechanisms and their acceptance ratios (`mechanisms`), data models
(`models`), the tempered sampler itself (`engine`), weighted-sample
estimators (`estimators`), exact rejection and enumeration references
(`baselines`), and the config-driven benchmark harness (`harness`, `cli`).
The names re-exported here are the stable public surface.
"""

from .baselines import (
    OraclePosterior,
    RejectionDraws,
    bernoulli_oracle,
    dp_reject_abc,
)
from .engine import (
    RunResult,
    Schedule,
    StallError,
    linear_schedule,
    logistic_schedule,
    run_dp_pf,
    two_step_schedule,
)
from .estimators import (
    EstimateReport,
    confidence_interval,
    ess_hat,
    estimate_report,
    normal_quantile,
    variance_hat,
    weighted_mean,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_config,
    run_coverage,
    run_experiment,
    run_logistic_analysis,
)
from .mechanisms import (
    ClampSpec,
    MechanismSpec,
    PrivateRelease,
    compose_budget,
    knorm_linf_sample,
    laplace_release,
    objective_perturbation,
)
from .models import (
    MODEL_NAMES,
    PARAMETER_NAMES,
    ModelSpec,
    bernoulli_toy,
    linreg_conjugate,
    linreg_nonconjugate,
    locscale_normal,
    logistic_beta,
    prior_sample,
    simulate_data,
    summary_stats,
    synthesize_census_like,
)
from .streams import RandomStream

__all__ = [
    "MODEL_NAMES",
    "PARAMETER_NAMES",
    "ClampSpec",
    "ConfigError",
    "EstimateReport",
    "ExperimentConfig",
    "MechanismSpec",
    "ModelSpec",
    "OraclePosterior",
    "PrivateRelease",
    "RandomStream",
    "RejectionDraws",
    "RunResult",
    "Schedule",
    "StallError",
    "bernoulli_oracle",
    "bernoulli_toy",
    "compose_budget",
    "confidence_interval",
    "dp_reject_abc",
    "ess_hat",
    "estimate_report",
    "knorm_linf_sample",
    "laplace_release",
    "linear_schedule",
    "linreg_conjugate",
    "linreg_nonconjugate",
    "load_config",
    "locscale_normal",
    "logistic_beta",
    "logistic_schedule",
    "normal_quantile",
    "objective_perturbation",
    "parse_config",
    "prior_sample",
    "run_coverage",
    "run_dp_pf",
    "run_experiment",
    "run_logistic_analysis",
    "simulate_data",
    "summary_stats",
    "synthesize_census_like",
    "two_step_schedule",
    "variance_hat",
    "weighted_mean",
]
