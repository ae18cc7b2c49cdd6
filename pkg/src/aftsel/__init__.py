"""Iterative variable selection for log-normal AFT survival models under
non-local coefficient priors, with a simulator and TPR/FDR benchmark."""

from .aft_core import (
    AftParams,
    ModelSpec,
    SurvivalDataset,
    aft_loglik,
    aft_loglik_derivs,
    fit_aft_mle,
    log_survival_std,
)
from .bayes_select import (
    ModelScore,
    log_marginal_laplace,
    log_model_prior,
    select_best_model,
)
from .bench import BenchmarkReport, compute_tpr_fdr, run_benchmark
from .driver import (
    MAXNO_EMPTY,
    POOL_EXHAUSTED,
    REACHED_M,
    STOP_REASONS,
    IterationRecord,
    SelectionResult,
    TuningParams,
    run_selection,
)
from .errors import ConvergenceError, DatasetFormatError, NumericalError
from .nlp_priors import (
    PRIOR_FAMILIES,
    PriorConfig,
    log_nlp_density,
    log_nlp_grad,
)
from .screening import (
    LeadingSet,
    UtilityTable,
    build_leading_sets,
    conditional_utility,
    marginal_utility,
    pick_leading_variables,
    utility_table,
)
from .simgen import SimConfig, simulate, simulate_aft, simulate_coxph

__version__ = "0.1.0"

__all__ = [
    "AftParams",
    "MAXNO_EMPTY",
    "POOL_EXHAUSTED",
    "REACHED_M",
    "STOP_REASONS",
    "BenchmarkReport",
    "ConvergenceError",
    "DatasetFormatError",
    "IterationRecord",
    "LeadingSet",
    "ModelScore",
    "ModelSpec",
    "NumericalError",
    "PRIOR_FAMILIES",
    "PriorConfig",
    "SelectionResult",
    "SimConfig",
    "SurvivalDataset",
    "TuningParams",
    "UtilityTable",
    "aft_loglik",
    "aft_loglik_derivs",
    "build_leading_sets",
    "compute_tpr_fdr",
    "conditional_utility",
    "fit_aft_mle",
    "log_marginal_laplace",
    "log_model_prior",
    "log_nlp_density",
    "log_nlp_grad",
    "log_survival_std",
    "marginal_utility",
    "pick_leading_variables",
    "run_benchmark",
    "run_selection",
    "select_best_model",
    "simulate",
    "simulate_aft",
    "simulate_coxph",
    "utility_table",
]
