"""Simulation-based log-likelihood estimators.

Both estimators simulate ``m`` datasets at ``theta``, reduce them to summary
vectors and compare those with the observed summary vector:

* empirical likelihood: ``(1/m) sum log w_i`` of the EL weights on the rows
  ``g(X_i) - g(X_o)``, or ``LOG_ZERO`` when no interior solution exists;
* synthetic likelihood: Gaussian log density of the observed summaries under
  the sample mean and unbiased sample covariance of the simulated ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .el import LOG_ZERO, SolverOptions, solve_el
from .models import GenerativeModel

EL = "el"
SYNTHETIC = "synthetic"
ESTIMATOR_KINDS = (EL, SYNTHETIC)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class EstimatorConfig:
    m: int
    kind: str = EL
    solver: SolverOptions = field(default_factory=SolverOptions)

    def validate(self, r: int) -> "EstimatorConfig":
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator {self.kind!r}; expected one of {ESTIMATOR_KINDS}")
        if self.kind == EL and self.m < 2:
            raise ValueError(f"empirical likelihood needs m >= 2 replicates, got {self.m}")
        if self.kind == SYNTHETIC and self.m < r + 2:
            raise ValueError(f"synthetic likelihood with {r} summaries needs m >= {r + 2}, got {self.m}")
        return self


@dataclass
class LikelihoodEstimate:
    log_value: float
    m: int
    status: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return self.log_value == LOG_ZERO


def el_from_summaries(S, s_obs, opts: SolverOptions | None = None) -> LikelihoodEstimate:
    S = np.asarray(S, dtype=float)
    m = S.shape[0]
    if not np.all(np.isfinite(S)):
        return LikelihoodEstimate(LOG_ZERO, m, "undefined_summary")
    sol = solve_el(S - np.asarray(s_obs, dtype=float), opts)
    return LikelihoodEstimate(sol.log_el, m, sol.status.value, {"iterations": sol.iterations})


def synth_from_summaries(S, s_obs) -> LikelihoodEstimate:
    S = np.asarray(S, dtype=float)
    m, r = S.shape
    if not np.all(np.isfinite(S)):
        return LikelihoodEstimate(LOG_ZERO, m, "undefined_summary")
    mean = S.mean(axis=0)
    cov = np.atleast_2d(np.cov(S, rowvar=False, ddof=1))
    cond = float(np.linalg.cond(cov))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        return LikelihoodEstimate(LOG_ZERO, m, "ill_conditioned", {"condition_number": cond})
    try:
        factor = cho_factor(cov, lower=True)
    except LinAlgError:
        return LikelihoodEstimate(LOG_ZERO, m, "ill_conditioned", {"condition_number": cond})
    diff = np.asarray(s_obs, dtype=float) - mean
    quad = float(diff @ cho_solve(factor, diff))
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    value = -0.5 * (r * np.log(2.0 * np.pi) + logdet + quad)
    return LikelihoodEstimate(value, m, "ok", {"condition_number": cond})


def simulate_summaries(model: GenerativeModel, theta, m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return model.summarize_many(model.simulate_many(np.asarray(theta, dtype=float), n, m, rng))


def el_loglik(model, theta, s_obs, cfg: EstimatorConfig, rng, n: int | None = None) -> LikelihoodEstimate:
    S = simulate_summaries(model, theta, cfg.m, n or model.default_n, rng)
    return el_from_summaries(S, s_obs, cfg.solver)


def synth_loglik(model, theta, s_obs, cfg: EstimatorConfig, rng, n: int | None = None) -> LikelihoodEstimate:
    S = simulate_summaries(model, theta, cfg.m, n or model.default_n, rng)
    return synth_from_summaries(S, s_obs)


def estimate_loglik(model, theta, s_obs, cfg: EstimatorConfig, rng, n: int | None = None) -> LikelihoodEstimate:
    if cfg.kind == EL:
        return el_loglik(model, theta, s_obs, cfg, rng, n)
    if cfg.kind == SYNTHETIC:
        return synth_loglik(model, theta, s_obs, cfg, rng, n)
    raise ValueError(f"unknown estimator {cfg.kind!r}")


def log_posterior_kernel(model, theta, s_obs, cfg: EstimatorConfig, rng, n: int | None = None) -> float:
    """Log prior plus estimated log likelihood; ``LOG_ZERO`` outside the prior support.

    Nothing is simulated for parameters outside the support.
    """
    lp = model.log_prior(theta)
    if lp == LOG_ZERO:
        return LOG_ZERO
    return lp + estimate_loglik(model, theta, s_obs, cfg, rng, n).log_value


def make_kernel(model, s_obs, cfg: EstimatorConfig, n: int | None = None) -> Callable:
    """Bind everything but (theta, rng) for use by the samplers."""
    cfg.validate(len(s_obs))
    s_obs = np.asarray(s_obs, dtype=float)

    def kernel(theta, rng):
        return log_posterior_kernel(model, theta, s_obs, cfg, rng, n)

    return kernel
