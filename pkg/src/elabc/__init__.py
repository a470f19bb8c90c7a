"""Empirical-likelihood ABC with synthetic-likelihood and rejection-ABC baselines."""

__version__ = "0.1.0"

from .el import LOG_ZERO, ELSolution, ELStatus, SolverOptions, log_el_scaled, quick_infeasibility_check, solve_el
from .models import GenerativeModel, get_model
from .pseudolik import EstimatorConfig, el_loglik, log_posterior_kernel, synth_loglik
from .samplers import Chain, RWMConfig, regression_adjust, rejection_abc, rwm_sample
from .summaries import SummarySpec, apply_spec

__all__ = [
    "LOG_ZERO",
    "Chain",
    "ELSolution",
    "ELStatus",
    "EstimatorConfig",
    "GenerativeModel",
    "RWMConfig",
    "SolverOptions",
    "SummarySpec",
    "apply_spec",
    "el_loglik",
    "get_model",
    "log_el_scaled",
    "log_posterior_kernel",
    "quick_infeasibility_check",
    "regression_adjust",
    "rejection_abc",
    "rwm_sample",
    "solve_el",
    "synth_loglik",
]
