"""Rejection ABC with regression adjustment, and the synthetic likelihood.

Both baselines share the evaluation context of the main method: the same
models, summaries and observed summary.  Rejection ABC measures distances
in summary space standardized by pilot-simulation median absolute
deviations; the synthetic likelihood scores the observed summary under a
normal fit to replicate summaries.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .posterior import EvaluationContext, LogPosteriorValue, pilot_standardizer
from .summaries import summarize, summarize_many


@dataclass
class AbcResult:
    """Accepted draws of one rejection-ABC run.

    accepted_theta / accepted_summaries are aligned row-wise; distances
    holds the standardized summary distances of the accepted rows, and
    scales the per-summary standardization used.  adjusted_theta is filled
    by regression_adjust.
    """

    accepted_theta: np.ndarray
    accepted_summaries: np.ndarray
    distances: np.ndarray
    tolerance_used: float
    scales: np.ndarray
    adjusted_theta: np.ndarray | None = None


def rejection_abc(
    ctx: EvaluationContext,
    n_sims: int,
    rng: np.random.Generator,
    tolerance: float | None = None,
    quantile: float | None = None,
    pilot_size: int = 200,
) -> AbcResult:
    """Prior draws kept when their summary lands close to the observed one.

    Exactly one of `tolerance` (absolute standardized distance) and
    `quantile` (keep fraction; keeps ceil(quantile * n_sims) draws) must
    be given.
    """
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    if (tolerance is None) == (quantile is None):
        raise ValueError("give exactly one of tolerance= and quantile=")

    _, scale = pilot_standardizer(
        ctx.model, ctx.summaries, ctx.n, rng, prior=ctx.prior, pilot_size=pilot_size
    )
    s_o = ctx.observed_summary
    r = s_o.size

    thetas = np.empty((n_sims, ctx.prior.dim))
    summaries = np.empty((n_sims, r))
    for i in range(n_sims):
        theta = ctx.prior.sample(rng)
        data = ctx.model.simulate(theta, ctx.n, rng)
        thetas[i] = theta
        summaries[i] = summarize(ctx.summaries, data)

    dist = np.sqrt((((summaries - s_o) / scale) ** 2).sum(axis=1))
    if quantile is not None:
        if not 0.0 < quantile <= 1.0:
            raise ValueError("quantile must lie in (0, 1]")
        count = min(n_sims, int(math.ceil(quantile * n_sims - 1e-12)))
        order = np.argsort(dist, kind="stable")[:count]
        keep = np.sort(order)
        tol_used = float(dist[keep].max())
    else:
        keep = np.flatnonzero(dist <= tolerance)
        tol_used = float(tolerance)

    return AbcResult(
        accepted_theta=thetas[keep],
        accepted_summaries=summaries[keep],
        distances=dist[keep],
        tolerance_used=tol_used,
        scales=scale,
    )


def regression_adjust(result: AbcResult, s_o, ridge: float = 0.0) -> AbcResult:
    """Shift each accepted theta by the fitted linear effect of (s - s_o).

    Fits theta ~ 1 + (s - s_o) by least squares (ridge-penalized on the
    slope block when ridge > 0) and subtracts the slope term, moving every
    draw to the summary value actually observed.  A rank-deficient design
    falls back to ridge 1e-6 with a warning.
    """
    theta = result.accepted_theta
    s = result.accepted_summaries
    s_o = np.asarray(s_o, dtype=float)
    n, d = theta.shape
    r = s.shape[1]
    if n < d + r + 1:
        raise ValueError(f"need at least d+r+1={d + r + 1} accepted points, got {n}")

    x = s - s_o
    design = np.column_stack([np.ones(n), x])

    def _ridge_fit(penalty):
        gram = design.T @ design + penalty * np.diag([0.0] + [1.0] * r)
        return np.linalg.solve(gram, design.T @ theta)

    if ridge > 0.0:
        beta = _ridge_fit(ridge)
    else:
        beta, _, rank, _ = np.linalg.lstsq(design, theta, rcond=None)
        if rank < r + 1:
            warnings.warn("singular regression design; falling back to ridge 1e-6", stacklevel=2)
            beta = _ridge_fit(1e-6)

    adjusted = theta - x @ beta[1:]
    return replace(result, adjusted_theta=adjusted)


def gaussian_loglik(s_o, replicate_summaries) -> float:
    """Log-density of s_o under a normal fit to the replicate summaries.

    Sample mean and covariance (ddof=1) are plugged in; a singular
    covariance gets a 1e-8 diagonal jitter with a warning.
    """
    s = np.asarray(replicate_summaries, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    s_o = np.atleast_1d(np.asarray(s_o, dtype=float))
    m, r = s.shape
    if m < r + 2:
        raise ValueError(f"need m >= r+2 replicates, got m={m}, r={r}")
    mu = s.mean(axis=0)
    cov = np.atleast_2d(np.cov(s, rowvar=False))
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        warnings.warn("singular summary covariance; adding 1e-8 jitter", stacklevel=2)
        chol = np.linalg.cholesky(cov + 1e-8 * np.eye(r))
    y = np.linalg.solve(chol, s_o - mu)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (r * math.log(2.0 * math.pi) + logdet + float(y @ y))


def synthetic_loglik(theta, ctx: EvaluationContext, rng: np.random.Generator) -> float:
    """Simulate m replicate summaries at theta and score s_o under their
    normal fit."""
    datasets = ctx.model.simulate_many(theta, ctx.n, ctx.m, rng)
    s = summarize_many(ctx.summaries, datasets)
    return gaussian_loglik(ctx.observed_summary, s)


class SyntheticTarget:
    """Sampler target: log prior + synthetic log-likelihood."""

    def __init__(self, ctx: EvaluationContext):
        self.ctx = ctx
        self.prior = ctx.prior
        self.rng = ctx.rng

    def evaluate(self, theta, rng=None) -> LogPosteriorValue:
        rng = self.rng if rng is None else rng
        prior_part = self.prior.log_density(theta)
        if prior_part == -math.inf:
            return LogPosteriorValue(-math.inf, math.nan, math.nan, prior_part, 0)
        ll = synthetic_loglik(theta, self.ctx, rng)
        return LogPosteriorValue(prior_part + ll, ll, 0.0, prior_part, self.ctx.m)
