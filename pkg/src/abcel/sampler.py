"""Adaptive random-walk Metropolis sampling on a stochastic log-posterior.

Proposals are normal steps on an unconstrained scale (bounded prior
coordinates go through logit/log transforms with the Jacobian folded into
the target).  After a fixed-proposal opening phase, the proposal
covariance follows the history covariance scaled by 2.4^2/d plus a small
jitter floor.  The current state's noisy log-posterior is evaluated once
and frozen, which keeps the chain a valid pseudo-marginal sampler;
proposals evaluating to -inf are always rejected.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .posterior import LogPosteriorValue

ADAPT_START = 1000
JITTER = 1e-8


class NoFeasibleStartError(RuntimeError):
    """No prior draw produced a finite posterior value.

    Either the prior mass sits where the weight problem is infeasible or
    the replicate count m is too small for the constraint hull to cover
    the origin; raising m usually helps.
    """


@dataclass
class Chain:
    draws: list[tuple[np.ndarray, LogPosteriorValue]]
    accepted: list[bool]
    acceptance_rate: float
    proposal_cov: np.ndarray
    burn_in: int
    seed: int | None = None

    def thetas(self) -> np.ndarray:
        return np.array([t for t, _ in self.draws])

    def log_posts(self) -> np.ndarray:
        return np.array([lp.value for _, lp in self.draws])


# ---------------------------------------------------------------------------
# transforms between the parameter box and the unconstrained proposal scale

class _Identity:
    def to_u(self, x):
        return x

    def to_x(self, u):
        return u

    def log_jac(self, u):
        return 0.0


class _LogLower:
    def __init__(self, a):
        self.a = a

    def to_u(self, x):
        return math.log(x - self.a)

    def to_x(self, u):
        return self.a + math.exp(u)

    def log_jac(self, u):
        return u


class _LogitBox:
    def __init__(self, a, b):
        self.a, self.b = a, b
        self.width = b - a

    def to_u(self, x):
        p = (x - self.a) / self.width
        return math.log(p / (1.0 - p))

    def to_x(self, u):
        return self.a + self.width / (1.0 + math.exp(-u))

    def log_jac(self, u):
        # log width + log sigmoid(u) + log sigmoid(-u)
        return math.log(self.width) - _softplus(u) - _softplus(-u)


def _softplus(u):
    return math.log1p(math.exp(-abs(u))) + max(u, 0.0)


def _transforms(prior):
    lo, hi = prior.support_box()
    out = []
    for a, b in zip(lo, hi):
        if math.isinf(a) and math.isinf(b):
            out.append(_Identity())
        elif math.isinf(b):
            out.append(_LogLower(a))
        else:
            out.append(_LogitBox(a, b))
    return out


def _to_u(transforms, theta):
    return np.array([t.to_u(x) for t, x in zip(transforms, theta)])


def _to_x(transforms, u):
    return np.array([t.to_x(v) for t, v in zip(transforms, u)])


def _log_jac(transforms, u):
    return sum(t.log_jac(v) for t, v in zip(transforms, u))


def _initial_sd(prior, transforms):
    # 5% of the central-95% prior range, measured on the proposal scale
    lo_u = _to_u(transforms, prior.quantile(0.025))
    hi_u = _to_u(transforms, prior.quantile(0.975))
    sd = 0.05 * np.abs(hi_u - lo_u)
    sd[sd == 0.0] = 0.05
    return sd


def init_chain(ctx, max_tries: int = 200, rng: np.random.Generator | None = None) -> np.ndarray:
    """First prior draw with a finite posterior value."""
    if max_tries < 1:
        raise ValueError("max_tries must be >= 1")
    rng = ctx.rng if rng is None else rng
    for _ in range(max_tries):
        theta = ctx.prior.sample(rng)
        if ctx.evaluate(theta, rng).value > -math.inf:
            return theta
    raise NoFeasibleStartError(
        f"no feasible start in {max_tries} prior draws; consider raising m"
    )


def run_chain(
    start,
    ctx,
    n_iter: int,
    n_burn: int = 0,
    rng: np.random.Generator | None = None,
    adapt_start: int = ADAPT_START,
    seed_label: int | None = None,
) -> Chain:
    """Metropolis chain of n_iter kept draws after n_burn burn-in steps.

    ctx must expose `prior` and `evaluate(theta, rng) -> LogPosteriorValue`.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    rng = ctx.rng if rng is None else rng
    transforms = _transforms(ctx.prior)
    theta = np.atleast_1d(np.asarray(start, dtype=float))
    d = theta.size

    lp = ctx.evaluate(theta, rng)
    if not lp.value > -math.inf:
        raise ValueError("the chain must start at a point with finite posterior value")
    u = _to_u(transforms, theta)
    target = lp.value + _log_jac(transforms, u)

    sd_fixed = _initial_sd(ctx.prior, transforms)
    scale = 2.4**2 / d
    mean = np.zeros(d)
    m2 = np.zeros((d, d))
    count = 0
    chol = np.diag(sd_fixed)

    draws: list[tuple[np.ndarray, LogPosteriorValue]] = []
    accepted_flags: list[bool] = []
    total = n_burn + n_iter

    for t in range(total):
        u_prop = u + chol @ rng.standard_normal(d)
        theta_prop = _to_x(transforms, u_prop)
        lp_prop = ctx.evaluate(theta_prop, rng)
        accept = False
        if lp_prop.value > -math.inf:
            target_prop = lp_prop.value + _log_jac(transforms, u_prop)
            if target_prop - target >= 0 or rng.random() < math.exp(target_prop - target):
                accept = True
        if accept:
            u, theta, lp, target = u_prop, theta_prop, lp_prop, target_prop

        count += 1
        delta = u - mean
        mean = mean + delta / count
        m2 = m2 + np.outer(delta, u - mean)
        if t + 1 >= adapt_start and count > 1:
            cov = scale * (m2 / (count - 1)) + JITTER * np.eye(d)
            chol = np.linalg.cholesky(cov)

        if t >= n_burn:
            draws.append((theta.copy(), lp))
            accepted_flags.append(accept)

    proposal_cov = chol @ chol.T
    return Chain(
        draws=draws,
        accepted=accepted_flags,
        acceptance_rate=float(np.mean(accepted_flags)),
        proposal_cov=proposal_cov,
        burn_in=n_burn,
        seed=seed_label,
    )


def write_chain_csv(chain: Chain, path) -> None:
    """One row per kept draw: iter, theta_1..theta_d, log_post, accepted."""
    d = chain.draws[0][0].size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter"] + [f"theta_{j + 1}" for j in range(d)] + ["log_post", "accepted"])
        for i, ((theta, lp), acc) in enumerate(zip(chain.draws, chain.accepted)):
            writer.writerow(
                [chain.burn_in + i]
                + [f"{x:.17g}" for x in theta]
                + [f"{lp.value:.17g}", int(acc)]
            )
