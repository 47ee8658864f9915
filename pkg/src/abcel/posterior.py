"""Log-posterior evaluation from fresh simulator replicates.

Each evaluation simulates m datasets at theta, forms the constraint rows
(replicated summary - observed summary), solves for the optimal
empirical-likelihood weights, estimates the differential entropy of the
replicated summaries, and returns

    log prior + mean log-weight + entropy estimate.

The value is -inf when theta leaves the prior support, when the weight
problem is infeasible, or when the entropy is undefined (duplicate
summaries).  Evaluations are stochastic: fresh replicates are drawn every
call, pseudo-marginal style.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .elcore import solve_el
from .entropy import (
    DuplicatePointsError,
    WeightVectorNu,
    default_k,
    euclidean_weights,
    gaussian_entropy,
    kl_entropy,
)
from .models import GenerativeModel
from .summaries import SummaryFn, summarize, summarize_many


@dataclass(frozen=True)
class LogPosteriorValue:
    """One stochastic log-posterior evaluation, split into its parts.

    value = prior_part + el_part + entropy_part whenever all parts are
    finite; -inf when the prior vanishes, the weight problem is
    infeasible (el_part = -inf) or the entropy is undefined
    (entropy_part = nan).
    """

    value: float
    el_part: float
    entropy_part: float
    prior_part: float
    m_used: int


def _zero_posterior(prior_part: float, el_part: float = math.nan, m_used: int = 0) -> LogPosteriorValue:
    return LogPosteriorValue(
        value=-math.inf,
        el_part=el_part,
        entropy_part=math.nan,
        prior_part=prior_part,
        m_used=m_used,
    )


@dataclass
class EvaluationContext:
    """Everything needed to evaluate the log-posterior at one parameter.

    The generator `rng` is consumed by evaluations that do not pass their
    own stream; samplers pass a per-chain stream instead.
    """

    model: GenerativeModel
    summaries: list[SummaryFn]
    observed_summary: np.ndarray
    n: int
    m: int
    k: int
    rng: np.random.Generator
    nu: WeightVectorNu
    prior: object
    standardizer: tuple[np.ndarray, np.ndarray] | None = None
    entropy_mode: str = "knn"
    el_tol: float = 1e-8
    el_max_iter: int = 50
    init_max_tries: int = 200

    def evaluate(self, theta, rng: np.random.Generator | None = None) -> LogPosteriorValue:
        return eval_log_posterior(theta, self, rng)


def make_context(
    model: GenerativeModel,
    summaries: list[SummaryFn],
    observed_summary,
    n: int,
    m: int,
    k: int | None = None,
    rng: np.random.Generator | None = None,
    prior=None,
    standardizer=None,
    entropy_mode: str = "knn",
    **kwargs,
) -> EvaluationContext:
    """Build a context, resolving the default neighbor order and weights."""
    if k is None:
        k = default_k(m)
    r = len(summaries)
    nu = euclidean_weights(k, r) if entropy_mode == "knn" else WeightVectorNu(np.zeros(k), k, r)
    observed_summary = np.asarray(observed_summary, dtype=float)
    if observed_summary.shape != (r,):
        raise ValueError(
            f"observed summary has dimension {observed_summary.shape}, expected ({r},)"
        )
    if entropy_mode not in ("knn", "gaussian"):
        raise ValueError(f"unknown entropy mode {entropy_mode!r}")
    return EvaluationContext(
        model=model,
        summaries=list(summaries),
        observed_summary=observed_summary,
        n=int(n),
        m=int(m),
        k=int(k),
        rng=rng if rng is not None else np.random.default_rng(),
        nu=nu,
        prior=prior if prior is not None else model.default_prior(),
        standardizer=standardizer,
        entropy_mode=entropy_mode,
        **kwargs,
    )


def pilot_standardizer(
    model: GenerativeModel,
    summaries: list[SummaryFn],
    n: int,
    rng: np.random.Generator,
    prior=None,
    pilot_size: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Affine standardization fitted at the prior median.

    Returns (center, scale): per-summary median and median absolute
    deviation over pilot replicates; zero deviations fall back to 1.
    """
    prior = prior if prior is not None else model.default_prior()
    theta = prior.quantile(0.5)
    sims = model.simulate_many(theta, n, pilot_size, rng)
    s = summarize_many(summaries, sims)
    center = np.median(s, axis=0)
    scale = np.median(np.abs(s - center), axis=0)
    scale[scale == 0.0] = 1.0
    return center, scale


class SimulatorFailure(RuntimeError):
    """The generative model raised during a posterior evaluation."""

    def __init__(self, theta, cause: BaseException):
        super().__init__(f"simulator failed at theta={np.asarray(theta)}: {cause}")
        self.theta = np.asarray(theta)
        self.__cause__ = cause


def eval_log_posterior(
    theta, ctx: EvaluationContext, rng: np.random.Generator | None = None
) -> LogPosteriorValue:
    """One stochastic evaluation of the log-posterior at theta."""
    rng = ctx.rng if rng is None else rng
    theta = np.atleast_1d(np.asarray(theta, dtype=float))

    prior_part = ctx.prior.log_density(theta)
    if prior_part == -math.inf:
        return _zero_posterior(prior_part)

    try:
        datasets = ctx.model.simulate_many(theta, ctx.n, ctx.m, rng)
        s = summarize_many(ctx.summaries, datasets)
    except Exception as exc:  # noqa: BLE001 - wrapped with the offending theta
        raise SimulatorFailure(theta, exc) from exc

    if not np.all(np.isfinite(s)):
        # e.g. empty datasets with undefined summaries: no density to match
        return _zero_posterior(prior_part, m_used=ctx.m)

    s_o = ctx.observed_summary
    if ctx.standardizer is not None:
        center, scale = ctx.standardizer
        s = (s - center) / scale
        s_o = (s_o - center) / scale

    sol = solve_el(s - s_o, tol=ctx.el_tol, max_iter=ctx.el_max_iter)
    if not sol.feasible:
        return _zero_posterior(prior_part, el_part=-math.inf, m_used=ctx.m)

    try:
        if ctx.entropy_mode == "gaussian":
            ent = gaussian_entropy(s)
        else:
            ent = kl_entropy(s, k=ctx.k, nu=ctx.nu).value
    except DuplicatePointsError:
        return _zero_posterior(prior_part, el_part=sol.mean_log_weight, m_used=ctx.m)

    return LogPosteriorValue(
        value=prior_part + sol.mean_log_weight + ent,
        el_part=sol.mean_log_weight,
        entropy_part=ent,
        prior_part=prior_part,
        m_used=ctx.m,
    )


def recommend_replications(n: int, alpha: float = 1.0, c1: float = 1.0) -> int:
    """Heuristic replicate count ceil(n^(alpha / c1^2)).

    A rule of thumb relating the replication budget to the sample size; it
    assumes roughly normal summary errors and should be sanity-checked per
    model.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if alpha <= 0 or c1 <= 0:
        raise ValueError("alpha and c1 must be positive")
    return int(math.ceil(n ** (alpha / (c1 * c1))))


def with_rng(ctx: EvaluationContext, rng: np.random.Generator) -> EvaluationContext:
    """A shallow copy of ctx bound to a different stream."""
    return replace(ctx, rng=rng)
