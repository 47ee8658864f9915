"""Likelihood-free Bayesian inference from empirical-likelihood weights and
nearest-neighbor entropy estimates, with rejection-ABC and synthetic-
likelihood baselines and an experiment harness."""

from .baselines import (
    AbcResult,
    SyntheticTarget,
    gaussian_loglik,
    regression_adjust,
    rejection_abc,
    synthetic_loglik,
)
from .elcore import ELSolution, NonFiniteConstraintError, feasibility_check, solve_el
from .entropy import (
    DuplicatePointsError,
    EntropyEstimate,
    InconsistentConstraintsError,
    WeightVectorNu,
    default_k,
    euclidean_weights,
    gaussian_entropy,
    kl_entropy,
    knn_table,
)
from .harness import (
    CoverageReport,
    ExperimentConfig,
    ExperimentResult,
    coverage_study,
    density_grid,
    export_plot_csvs,
    load_config,
    parse_config,
    run_experiment,
    serialize_config,
)
from .models import MODEL_REGISTRY, GenerativeModel, Prior, get_model, parse_prior
from .posterior import (
    EvaluationContext,
    LogPosteriorValue,
    SimulatorFailure,
    eval_log_posterior,
    make_context,
    pilot_standardizer,
    recommend_replications,
)
from .sampler import Chain, NoFeasibleStartError, init_chain, run_chain, write_chain_csv
from .seeding import substream
from .summaries import (
    PeriodogramTooShortError,
    SummaryFn,
    make_summaries,
    make_summary,
    summarize,
    summarize_many,
)

__version__ = "0.1.0"
