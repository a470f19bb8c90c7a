"""Posterior samplers.

``rwm_sample`` is a pseudo-marginal random-walk Metropolis sampler: the
noisy log-kernel of the current state is cached and reused until a proposal
is accepted.  ``rejection_abc`` plus ``regression_adjust`` give the
rejection-ABC reference posterior with local-linear adjustment.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rng import substream

# Substream keys: (seed, _CHAINS, chain_id, kind, ...) for MCMC and
# (seed, _ABC, block) for rejection ABC; other top-level keys are free.
_CHAINS = 0
_ABC = 1
_PROPOSAL_STREAM = 0
_KERNEL_STREAM = 1
_INIT_STREAM = 2
_START_RETRIES = 100


class InitializationError(RuntimeError):
    pass


class SingularDesign(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class RWMConfig:
    iterations: int
    burnin: int = 0
    proposal_scale: tuple = (1.0,)
    adapt: bool = True
    target_accept: float = 0.234
    init_tries: int = 1000
    multiplier_bounds: tuple = (0.1, 10.0)

    def validate(self, dim: int) -> "RWMConfig":
        scale = np.asarray(self.proposal_scale, dtype=float)
        if self.iterations < 1 or self.burnin < 0:
            raise ValueError("iterations must be positive and burn-in non-negative")
        if scale.shape not in ((1,), (dim,)):
            raise ValueError(f"proposal scale must have length 1 or {dim}, got {scale.shape}")
        if not np.all(np.isfinite(scale)) or np.any(scale <= 0):
            raise ValueError("proposal scales must be positive and finite; a zero scale never moves the chain")
        lo, hi = self.multiplier_bounds
        if not 0 < lo <= 1 <= hi:
            raise ValueError(f"multiplier bounds must satisfy 0 < lo <= 1 <= hi, got {self.multiplier_bounds}")
        return self


@dataclass
class Chain:
    draws: np.ndarray
    log_kernels: np.ndarray
    accepted: np.ndarray
    proposal_scale: np.ndarray
    param_names: tuple = ()
    seed: int = 0
    chain_id: int = 0

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted))

    def to_csv(self) -> str:
        names = self.param_names or tuple(f"theta{j}" for j in range(self.draws.shape[1]))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*names, "logKernel", "accepted"])
        for row, lk, acc in zip(self.draws, self.log_kernels, self.accepted):
            writer.writerow([*(repr(float(v)) for v in row), repr(float(lk)), int(acc)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def read_chain_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Parameter names and draws from a chain (or ABC result) CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header = rows[0]
    skip = {"logKernel", "accepted", "distance"}
    cols = [j for j, name in enumerate(header) if name not in skip]
    draws = np.array([[float(r[j]) for j in cols] for r in rows[1:]], dtype=float).reshape(-1, len(cols))
    return tuple(header[j] for j in cols), draws


def rwm_sample(
    kernel: Callable,
    theta0,
    cfg: RWMConfig,
    seed: int,
    chain_id: int = 0,
    prior_sampler: Callable | None = None,
    param_names: tuple = (),
) -> Chain:
    """Random-walk Metropolis with Gaussian proposals on a noisy log kernel.

    ``kernel(theta, rng)`` returns a log posterior estimate or ``-inf``.
    During burn-in, when ``cfg.adapt`` is set, a global multiplier ``s`` of
    the diagonal proposal scales follows the Robbins-Monro recursion
    ``log s += t**-0.6 * (alpha_t - target)`` with ``alpha_t`` the Metropolis
    acceptance probability; it is frozen after burn-in.  The multiplier is
    kept within ``cfg.multiplier_bounds``: with a very noisy kernel the
    acceptance rate stays far below target at every scale and an unbounded
    recursion would shrink the proposal to nothing.
    """
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    dim = theta.size
    cfg.validate(dim)
    scale = np.broadcast_to(np.asarray(cfg.proposal_scale, dtype=float), (dim,)).copy()
    rng = substream(seed, _CHAINS, chain_id, _PROPOSAL_STREAM)

    # A noisy kernel can be -inf at a good point by chance: retry theta0 a
    # few times before falling back to prior draws.
    start = theta
    current = kernel(theta, substream(seed, _CHAINS, chain_id, _INIT_STREAM, 0))
    tries = 0
    while not np.isfinite(current):
        tries += 1
        if tries > cfg.init_tries or (prior_sampler is None and tries >= _START_RETRIES):
            raise InitializationError(
                f"no starting point with finite log kernel after {tries} attempts"
            )
        if tries < _START_RETRIES:
            theta = start
        else:
            theta = np.atleast_1d(np.asarray(prior_sampler(rng), dtype=float))
        current = kernel(theta, substream(seed, _CHAINS, chain_id, _INIT_STREAM, tries))

    total = cfg.burnin + cfg.iterations
    draws = np.empty((cfg.iterations, dim))
    log_kernels = np.empty(cfg.iterations)
    accepted = np.zeros(cfg.iterations, dtype=bool)
    log_mult = 0.0
    log_lo, log_hi = np.log(cfg.multiplier_bounds[0]), np.log(cfg.multiplier_bounds[1])
    for t in range(total):
        proposal = theta + np.exp(log_mult) * scale * rng.standard_normal(dim)
        log_u = np.log(rng.random())
        cand = kernel(proposal, substream(seed, _CHAINS, chain_id, _KERNEL_STREAM, t))
        log_ratio = cand - current if np.isfinite(cand) else -np.inf
        accept = log_u < log_ratio
        if accept:
            theta, current = proposal, cand
        if t < cfg.burnin:
            if cfg.adapt:
                alpha = float(np.exp(min(0.0, log_ratio)))
                log_mult += (t + 1) ** -0.6 * (alpha - cfg.target_accept)
                log_mult = min(max(log_mult, log_lo), log_hi)
        else:
            k = t - cfg.burnin
            draws[k] = theta
            log_kernels[k] = current
            accepted[k] = accept
    return Chain(draws, log_kernels, accepted, np.exp(log_mult) * scale, tuple(param_names), seed, chain_id)


# -- rejection ABC -------------------------------------------------------------


@dataclass
class AbcResult:
    theta: np.ndarray
    summaries: np.ndarray
    distances: np.ndarray
    tolerance: float
    n_total: int
    scale: np.ndarray
    adjusted: np.ndarray | None = None
    param_names: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def n_keep(self) -> int:
        return len(self.theta)

    def write_csv(self, path) -> None:
        names = self.param_names or tuple(f"theta{j}" for j in range(self.theta.shape[1]))
        draws = self.adjusted if self.adjusted is not None else self.theta
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([*names, *(f"raw_{nm}" for nm in names), "distance"])
            for adj, raw, d in zip(draws, self.theta, self.distances):
                writer.writerow([*(repr(float(v)) for v in adj), *(repr(float(v)) for v in raw), repr(float(d))])


def mad_scale(S) -> np.ndarray:
    """Per-column median absolute deviation, falling back to 1 for constant columns."""
    S = np.asarray(S, dtype=float)
    S = S[np.all(np.isfinite(S), axis=1)]
    if len(S) == 0:
        return np.ones(np.shape(S)[1])
    mad = np.median(np.abs(S - np.median(S, axis=0)), axis=0)
    return np.where(mad > 0, mad, 1.0)


def rejection_abc(
    model,
    s_obs,
    n_total: int,
    seed: int,
    keep: int | None = None,
    keep_fraction: float | None = None,
    tolerance: float | None = None,
    n: int | None = None,
    lower=None,
    upper=None,
    scale_draws: int = 10_000,
    block: int = 1000,
    adjust: bool = True,
) -> AbcResult:
    """Rejection ABC with MAD-standardised Euclidean distance on the summaries.

    Exactly one of ``keep``, ``keep_fraction`` or ``tolerance`` selects the
    accepted set.  ``lower``/``upper`` replace the model prior by a uniform
    box (used for restricted reference runs).
    """
    if sum(x is not None for x in (keep, keep_fraction, tolerance)) != 1:
        raise ValueError("give exactly one of keep, keep_fraction, tolerance")
    s_obs = np.asarray(s_obs, dtype=float)
    n = n or model.default_n
    box = lower is not None
    lo = np.asarray(lower if box else model.lower, dtype=float)
    hi = np.asarray(upper if box else model.upper, dtype=float)

    thetas = np.empty((n_total, model.dim))
    S = np.empty((n_total, len(s_obs)))
    for b, start in enumerate(range(0, n_total, block)):
        rng = substream(seed, _ABC, b)
        stop = min(start + block, n_total)
        for j in range(start, stop):
            th = rng.uniform(lo, hi) if box else model.sample_prior(rng)
            thetas[j] = th
            if model.in_support(th):
                S[j] = model.summarize_many(model.simulate_many(th, n, 1, rng))[0]
            else:
                S[j] = np.nan

    scale = mad_scale(S[: min(scale_draws, n_total)])
    dist = np.sqrt(np.sum(((S - s_obs) / scale) ** 2, axis=1))
    dist[~np.isfinite(dist)] = np.inf

    order = np.argsort(dist, kind="stable")
    if tolerance is not None:
        chosen = order[dist[order] <= tolerance]
    else:
        n_keep = keep if keep is not None else int(round(keep_fraction * n_total))
        if not 1 <= n_keep <= n_total:
            raise ValueError(f"number kept must be in [1, {n_total}], got {n_keep}")
        chosen = order[:n_keep]
    tol_used = float(tolerance) if tolerance is not None else float(dist[chosen].max())
    result = AbcResult(
        theta=thetas[chosen],
        summaries=S[chosen],
        distances=dist[chosen],
        tolerance=tol_used,
        n_total=n_total,
        scale=scale,
        param_names=model.param_names,
    )
    if adjust and result.n_keep > len(s_obs) + 1:
        result.adjusted = regression_adjust(result, s_obs)
    return result


def fit_linear_adjustment(theta, S, s_obs) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares fit of theta = a + B'(s - s_obs).

    Returns the intercept ``a`` (length p) and ``B`` (r x p).  Columns of
    ``S`` that are constant carry no information and get zero coefficients.
    """
    theta = np.asarray(theta, dtype=float)
    X = np.asarray(S, dtype=float) - np.asarray(s_obs, dtype=float)
    if theta.ndim == 1:
        theta = theta[:, None]
    N, r = X.shape
    varying = np.ptp(X, axis=0) > 0
    design = np.column_stack([np.ones(N), X[:, varying]])
    if N <= design.shape[1] - 1 or np.linalg.matrix_rank(design) < design.shape[1]:
        raise SingularDesign("kept summaries are collinear; regression adjustment is undefined")
    coef, *_ = np.linalg.lstsq(design, theta, rcond=None)
    B = np.zeros((r, theta.shape[1]))
    B[varying] = coef[1:]
    return coef[0], B


def regression_adjust(result: AbcResult, s_obs) -> np.ndarray:
    """theta_adj = theta - B'(s - s_obs) for the kept draws."""
    _, B = fit_linear_adjustment(result.theta, result.summaries, s_obs)
    return result.theta - (np.asarray(result.summaries) - np.asarray(s_obs, dtype=float)) @ B
