"""Generative models, their priors, and the model registry.

Each model exposes a prior, a single-dataset simulator, and a batched
simulator used by the posterior evaluator.  Simulators are pure functions
of (theta, size, rng); reproducibility comes entirely from the generator
passed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats


# ---------------------------------------------------------------------------
# priors

class Marginal:
    """One prior coordinate: density, sampler, support interval, quantiles."""

    lo: float
    hi: float

    def log_density(self, x: float) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def quantile(self, q: float) -> float:
        raise NotImplementedError

    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformMarginal(Marginal):
    a: float
    b: float

    @property
    def lo(self):
        return self.a

    @property
    def hi(self):
        return self.b

    def log_density(self, x):
        if self.a < x < self.b:
            return -math.log(self.b - self.a)
        return -math.inf

    def sample(self, rng):
        return rng.uniform(self.a, self.b)

    def quantile(self, q):
        return self.a + q * (self.b - self.a)

    def spec(self):
        return f"uniform({self.a:g},{self.b:g})"


@dataclass(frozen=True)
class NormalMarginal(Marginal):
    mu: float
    sd: float

    @property
    def lo(self):
        return -math.inf

    @property
    def hi(self):
        return math.inf

    def log_density(self, x):
        z = (x - self.mu) / self.sd
        return -0.5 * z * z - math.log(self.sd) - 0.5 * math.log(2.0 * math.pi)

    def sample(self, rng):
        return rng.normal(self.mu, self.sd)

    def quantile(self, q):
        return self.mu + self.sd * stats.norm.ppf(q)

    def spec(self):
        return f"normal({self.mu:g},{self.sd:g})"


@dataclass(frozen=True)
class BetaMarginal(Marginal):
    alpha: float
    beta: float

    @property
    def lo(self):
        return 0.0

    @property
    def hi(self):
        return 1.0

    def log_density(self, x):
        if not 0.0 < x < 1.0:
            return -math.inf
        return (
            (self.alpha - 1.0) * math.log(x)
            + (self.beta - 1.0) * math.log1p(-x)
            - (math.lgamma(self.alpha) + math.lgamma(self.beta) - math.lgamma(self.alpha + self.beta))
        )

    def sample(self, rng):
        return rng.beta(self.alpha, self.beta)

    def quantile(self, q):
        return float(stats.beta.ppf(q, self.alpha, self.beta))

    def spec(self):
        return f"beta({self.alpha:g},{self.beta:g})"


class Prior:
    """Product prior over the parameter coordinates."""

    def __init__(self, marginals: list[Marginal]):
        self.marginals = list(marginals)

    @property
    def dim(self) -> int:
        return len(self.marginals)

    def log_density(self, theta) -> float:
        theta = np.atleast_1d(theta)
        total = 0.0
        for m, x in zip(self.marginals, theta):
            lp = m.log_density(float(x))
            if lp == -math.inf:
                return -math.inf
            total += lp
        return total

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([m.sample(rng) for m in self.marginals])

    def support_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([m.lo for m in self.marginals])
        hi = np.array([m.hi for m in self.marginals])
        return lo, hi

    def quantile(self, q: float) -> np.ndarray:
        return np.array([m.quantile(q) for m in self.marginals])

    def specs(self) -> list[str]:
        return [m.spec() for m in self.marginals]


def parse_marginal(spec: str) -> Marginal:
    """Parse 'uniform(a,b)' / 'normal(mu,sd)' / 'beta(a,b)'."""
    spec = spec.strip()
    if "(" not in spec or not spec.endswith(")"):
        raise ValueError(f"bad prior spec {spec!r}")
    name, argtext = spec[:-1].split("(", 1)
    args = [float(a) for a in argtext.split(",")]
    name = name.strip().lower()
    if name == "uniform":
        return UniformMarginal(*args)
    if name == "normal":
        return NormalMarginal(*args)
    if name == "beta":
        return BetaMarginal(*args)
    raise ValueError(f"unknown prior family {name!r}")


def parse_prior(specs) -> Prior:
    if isinstance(specs, str):
        specs = split_toplevel(specs)
    return Prior([parse_marginal(s) for s in specs])


def split_toplevel(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur).strip())
    return [p for p in parts if p]


# ---------------------------------------------------------------------------
# models

class GenerativeModel:
    """Interface: name, param_dim, default prior, and simulators."""

    name: str
    param_dim: int

    def default_prior(self) -> Prior:
        raise NotImplementedError

    def simulate(self, theta, size: int, rng: np.random.Generator):
        raise NotImplementedError

    def simulate_many(self, theta, size: int, m: int, rng: np.random.Generator):
        """m datasets; stacked as an (m, ...) array when shapes are fixed."""
        return np.stack([self.simulate(theta, size, rng) for _ in range(m)])


class NormalMeanModel(GenerativeModel):
    """i.i.d. N(mu, 1) observations."""

    name = "normal_mean"
    param_dim = 1

    def default_prior(self):
        return Prior([NormalMarginal(0.0, 1.0)])

    def simulate(self, theta, size, rng):
        return float(np.atleast_1d(theta)[0]) + rng.standard_normal(size)

    def simulate_many(self, theta, size, m, rng):
        return float(np.atleast_1d(theta)[0]) + rng.standard_normal((m, size))


class NormalVarianceModel(GenerativeModel):
    """i.i.d. N(0, theta) observations; theta is the variance."""

    name = "normal_var"
    param_dim = 1

    def default_prior(self):
        return Prior([UniformMarginal(0.0, 10.0)])

    def simulate(self, theta, size, rng):
        v = float(np.atleast_1d(theta)[0])
        if v <= 0:
            raise ValueError("variance must be positive")
        return math.sqrt(v) * rng.standard_normal(size)

    def simulate_many(self, theta, size, m, rng):
        v = float(np.atleast_1d(theta)[0])
        if v <= 0:
            raise ValueError("variance must be positive")
        return math.sqrt(v) * rng.standard_normal((m, size))


class GKModel(GenerativeModel):
    """Quantile-function model with location A, scale B, skewness g, kurtosis k."""

    name = "gk"
    param_dim = 4
    c = 0.8

    def default_prior(self):
        return Prior([UniformMarginal(0.0, 10.0) for _ in range(4)])

    @classmethod
    def quantile_from_z(cls, z, theta):
        a, b, g, k = (float(v) for v in np.atleast_1d(theta))
        if b <= 0:
            raise ValueError("scale B must be positive")
        if k <= -0.5:
            raise ValueError("kurtosis parameter k must exceed -0.5")
        z = np.asarray(z, dtype=float)
        # (1 - exp(-g z)) / (1 + exp(-g z)) = tanh(g z / 2)
        return a + b * (1.0 + cls.c * np.tanh(0.5 * g * z)) * np.power(1.0 + z * z, k) * z

    @classmethod
    def quantile(cls, p, theta):
        return cls.quantile_from_z(stats.norm.ppf(p), theta)

    def simulate(self, theta, size, rng):
        return self.quantile_from_z(rng.standard_normal(size), theta)

    def simulate_many(self, theta, size, m, rng):
        return self.quantile_from_z(rng.standard_normal((m, size)), theta)


@njit(cache=True)
def _arch_paths(eps, a0, a1, warm):
    m, total = eps.shape
    n = total - warm
    out = np.empty((m, n))
    for i in range(m):
        x = math.sqrt(a0 / (1.0 - a1)) * eps[i, 0]
        for j in range(1, total):
            x = math.sqrt(a0 + a1 * x * x) * eps[i, j]
            if j >= warm:
                out[i, j - warm] = x
    return out


class Arch1Model(GenerativeModel):
    """Conditionally heteroskedastic series X_j = sigma_j eps_j,
    sigma_j^2 = a0 + a1 X_{j-1}^2.

    The start is drawn from the stationary marginal N(0, a0/(1-a1)) and 100
    warm-up steps are discarded before the kept stretch.
    """

    name = "arch1"
    param_dim = 2
    warmup = 100

    def default_prior(self):
        return Prior([UniformMarginal(0.0, 5.0), UniformMarginal(0.0, 1.0)])

    @staticmethod
    def _check(theta):
        a0, a1 = (float(v) for v in np.atleast_1d(theta))
        if a0 <= 0 or not 0.0 <= a1 < 1.0:
            raise ValueError("need a0 > 0 and 0 <= a1 < 1")
        return a0, a1

    def simulate(self, theta, size, rng):
        return self.simulate_many(theta, size, 1, rng)[0]

    def simulate_many(self, theta, size, m, rng):
        a0, a1 = self._check(theta)
        eps = rng.standard_normal((m, size + self.warmup + 1))
        return _arch_paths(eps, a0, a1, self.warmup + 1)


@njit(cache=True)
def _boom_bust_paths(seed, n, burn, growth, kappa, alpha, beta, m):
    np.random.seed(seed)
    out = np.empty((m, n), dtype=np.int64)
    for i in range(m):
        x = int(kappa) + 1
        for j in range(n + burn):
            if x <= kappa:
                nxt = np.random.poisson(x * (1.0 + growth))
            else:
                nxt = np.random.binomial(x, alpha)
            nxt += np.random.poisson(beta)
            x = nxt
            if j >= burn:
                out[i, j - burn] = x
    return out


class BoomBustModel(GenerativeModel):
    """Regime-switching counts: Poisson growth at or below kappa, Binomial
    thinning above, plus Poisson(beta) noise.

    Paths start just above the threshold (floor(kappa)+1) and the first
    `burn` values (default 50) are discarded.
    """

    name = "boom_bust"
    param_dim = 4
    burn = 50

    def default_prior(self):
        return Prior(
            [
                UniformMarginal(0.0, 1.0),
                UniformMarginal(30.0, 80.0),
                UniformMarginal(0.0, 1.0),
                UniformMarginal(0.0, 1.0),
            ]
        )

    @staticmethod
    def _check(theta):
        growth, kappa, alpha, beta = (float(v) for v in np.atleast_1d(theta))
        if growth < 0 or beta < 0 or not 0.0 <= alpha <= 1.0 or kappa <= 0:
            raise ValueError("need growth, beta >= 0, alpha in [0, 1], kappa > 0")
        return growth, kappa, alpha, beta

    def simulate(self, theta, size, rng, burn: int | None = None):
        return self.simulate_many(theta, size, 1, rng, burn=burn)[0]

    def simulate_many(self, theta, size, m, rng, burn: int | None = None):
        growth, kappa, alpha, beta = self._check(theta)
        seed = int(rng.integers(0, 2**31 - 1))
        b = self.burn if burn is None else int(burn)
        return _boom_bust_paths(seed, size, b, growth, kappa, alpha, beta, m)


class StereoModel(GenerativeModel):
    """Elliptical inclusions cut by a plane; datasets are the planar largest
    diameters exceeding the measurement threshold.

    Candidate inclusions arrive as a Poisson(lambda * thickness) count in a
    unit-area slab; the largest principal diameter V follows v0 plus a
    generalized Pareto (sigma, xi) law, the other two diameters are V times
    independent U(0,1) factors.  The plane hits an inclusion with
    probability min(perp/thickness, 1) where perp is the randomly oriented
    principal diameter perpendicular to the plane, and the section ellipse
    at a uniform offset rescales the in-plane diameters by
    sqrt(1 - u^2), u ~ U(0,1).

    The geometry is a documented approximation of the usual sectioning
    construction; thickness caps the hit probability for very large
    inclusions.
    """

    name = "stereo"
    param_dim = 3
    v0 = 5.0
    thickness = 25.0

    def default_prior(self):
        return Prior(
            [
                UniformMarginal(1.0, 200.0),
                UniformMarginal(0.0, 10.0),
                UniformMarginal(-5.0, 5.0),
            ]
        )

    @staticmethod
    def _check(theta):
        lam, sigma, xi = (float(v) for v in np.atleast_1d(theta))
        if lam <= 0 or sigma <= 0:
            raise ValueError("need lambda > 0 and sigma > 0")
        return lam, sigma, xi

    @classmethod
    def _gpd_excess(cls, sigma, xi, u):
        if abs(xi) < 1e-12:
            return -sigma * np.log1p(-u)
        return sigma / xi * np.expm1(-xi * np.log1p(-u))

    def _one_dataset(self, lam, sigma, xi, rng, with_parents=False):
        count = rng.poisson(lam * self.thickness)
        if count == 0:
            planar = np.empty(0)
            return (planar, np.empty(0)) if with_parents else planar
        v = self.v0 + self._gpd_excess(sigma, xi, rng.random(count))
        u1 = rng.random(count)
        u2 = rng.random(count)
        axis = rng.integers(0, 3, size=count)
        perp = np.where(axis == 0, v, np.where(axis == 1, v * u1, v * u2))
        inplane = np.where(axis == 0, v * np.maximum(u1, u2), v)
        hit = rng.random(count) < np.minimum(perp / self.thickness, 1.0)
        shrink = np.sqrt(1.0 - rng.random(count) ** 2)
        planar = inplane * shrink
        keep = hit & (planar >= self.v0)
        if with_parents:
            return planar[keep], v[keep]
        return planar[keep]

    def simulate(self, theta, size, rng):
        # dataset size is the random inclusion count; `size` is ignored
        lam, sigma, xi = self._check(theta)
        return self._one_dataset(lam, sigma, xi, rng)

    def simulate_with_parents(self, theta, rng):
        """(planar measurements, matching largest diameters V), for checks."""
        lam, sigma, xi = self._check(theta)
        return self._one_dataset(lam, sigma, xi, rng, with_parents=True)

    def simulate_many(self, theta, size, m, rng):
        lam, sigma, xi = self._check(theta)
        return [self._one_dataset(lam, sigma, xi, rng) for _ in range(m)]


class ERGraphModel(GenerativeModel):
    """Erdos-Renyi graph: symmetric 0/1 adjacency with zero diagonal."""

    name = "er_graph"
    param_dim = 1

    def default_prior(self):
        return Prior([BetaMarginal(1.5, 1.5)])

    def simulate(self, theta, size, rng):
        return self.simulate_many(theta, size, 1, rng)[0]

    def simulate_many(self, theta, size, m, rng):
        p = float(np.atleast_1d(theta)[0])
        if not 0.0 <= p <= 1.0:
            raise ValueError("edge probability must lie in [0, 1]")
        n = int(size)
        iu, ju = np.triu_indices(n, k=1)
        bits = (rng.random((m, iu.size)) < p).astype(np.uint8)
        adj = np.zeros((m, n, n), dtype=np.uint8)
        adj[:, iu, ju] = bits
        adj[:, ju, iu] = bits
        return adj


MODEL_REGISTRY: dict[str, type[GenerativeModel]] = {
    cls.name: cls
    for cls in (
        NormalMeanModel,
        NormalVarianceModel,
        GKModel,
        Arch1Model,
        BoomBustModel,
        StereoModel,
        ERGraphModel,
    )
}


def get_model(name: str) -> GenerativeModel:
    try:
        return MODEL_REGISTRY[name]()
    except KeyError:
        raise KeyError(
            f"unknown model {name!r}; available: {sorted(MODEL_REGISTRY)}"
        ) from None
