"""Differential-entropy estimation from nearest-neighbor distances.

The estimator averages, over points and neighbor orders j, weighted log
ball volumes at the j-th neighbor distance:

    H_hat = (1/m) sum_i sum_j nu_j log( e^{-psi(j)} V_r (m-1) rho_{(j),i}^r )

with V_r the unit-ball volume and psi the digamma function.  The weights
nu live on a support grid of neighbor orders and satisfy moment
constraints that cancel the leading bias terms in dimension r >= 4; they
are chosen by minimizing sum_j (k*nu_j - 1)^2 subject to those
constraints.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

EULER_GAMMA = 0.5772156649015328606

# above this many points a k-d tree finds the neighbor indices; below,
# the full distance matrix is cheaper
_BRUTE_FORCE_LIMIT = 512


class DuplicatePointsError(ValueError):
    """Some input points coincide, so neighbor distances are zero."""


class InconsistentConstraintsError(ValueError):
    """The weight constraints cannot be satisfied on the support grid."""


@dataclass(frozen=True)
class WeightVectorNu:
    """Neighbor-order weights: nu[j-1] applies to the j-th neighbor."""

    nu: np.ndarray
    k: int
    r: int


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    k: int
    nu: WeightVectorNu


def digamma_int(j: int) -> float:
    """psi(j) for integer j >= 1: -gamma + sum_{i<j} 1/i."""
    if j < 1:
        raise ValueError("digamma_int needs j >= 1")
    return -EULER_GAMMA + sum(1.0 / i for i in range(1, j))


@functools.lru_cache(maxsize=None)
def _digamma_row(k: int) -> np.ndarray:
    row = np.empty(k)
    acc = -EULER_GAMMA
    for j in range(1, k + 1):
        row[j - 1] = acc
        acc += 1.0 / j
    row.setflags(write=False)
    return row


def default_k(m: int) -> int:
    """ceil(m^(1/3)), kept within [3, m-1]."""
    return min(max(3, math.ceil(m ** (1.0 / 3.0))), m - 1)


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("points must be an (m, r) array")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    return x


def _knn_brute(x: np.ndarray, k: int) -> np.ndarray:
    if x.shape[1] == 1:
        col = x[:, 0]
        d = np.abs(col[:, None] - col[None, :])
    else:
        diff = x[:, None, :] - x[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(d, np.inf)
    if d.min() == 0.0:
        raise DuplicatePointsError("duplicate points: zero neighbor distance")
    d.sort(axis=1)
    return d[:, :k]


def _knn_tree(x: np.ndarray, k: int) -> np.ndarray:
    tree = cKDTree(x)
    _, idx = tree.query(x, k=k + 1)
    # recompute distances with the same arithmetic as the brute-force path
    diff = x[:, None, :] - x[idx]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    d.sort(axis=1)
    d = d[:, 1:]
    if np.min(d) == 0.0:
        raise DuplicatePointsError("duplicate points: zero neighbor distance")
    return d


def knn_table(points, k: int) -> np.ndarray:
    """Exact Euclidean distances to the k nearest neighbors of every point.

    Returns an (m, k) array with nondecreasing rows; the point itself is
    excluded.  Raises DuplicatePointsError when any two points coincide.
    """
    x = _as_points(points)
    m = x.shape[0]
    if k < 1 or k > m - 1:
        raise ValueError(f"k must be in [1, m-1], got k={k} with m={m}")
    if m < _BRUTE_FORCE_LIMIT:
        return _knn_brute(x, k)
    return _knn_tree(x, k)


def support_grid(k: int, r: int) -> np.ndarray:
    """Neighbor orders {floor(j*k/r) : j = 1..r}, deduplicated, zero dropped."""
    grid = sorted({(j * k) // r for j in range(1, r + 1)} - {0})
    return np.array(grid, dtype=int)


def euclidean_weights(k: int, r: int) -> WeightVectorNu:
    """Minimize sum_j (k*nu_j - 1)^2 over the admissible weight set.

    Admissible weights sum to one, vanish off the support grid, and have
    zero Gamma moments sum_j nu_j * Gamma(j + 2l/r)/Gamma(j) for
    l = 1..floor(r/4).  Solved through the KKT system of the
    equality-constrained quadratic program.
    """
    if k < 1 or r < 1:
        raise ValueError("k and r must be >= 1")
    grid = support_grid(k, r)
    s = len(grid)
    n_gamma = r // 4
    rows = [np.ones(s)]
    rhs = [1.0]
    for l in range(1, n_gamma + 1):
        rows.append(np.array([math.exp(math.lgamma(j + 2.0 * l / r) - math.lgamma(j)) for j in grid]))
        rhs.append(0.0)
    a = np.vstack(rows)
    b = np.array(rhs)
    nc = a.shape[0]

    kkt = np.zeros((s + nc, s + nc))
    kkt[:s, :s] = 2.0 * k * k * np.eye(s)
    kkt[:s, s:] = a.T
    kkt[s:, :s] = a
    rhs_full = np.concatenate([np.full(s, 2.0 * k), b])
    try:
        sol = np.linalg.solve(kkt, rhs_full)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(kkt, rhs_full, rcond=None)
    nu_s = sol[:s]
    if not np.all(np.isfinite(nu_s)) or np.max(np.abs(a @ nu_s - b)) > 1e-8:
        raise InconsistentConstraintsError(
            f"weight constraints unsatisfiable for k={k}, r={r}; increase k"
        )
    nu = np.zeros(k)
    nu[grid - 1] = nu_s
    return WeightVectorNu(nu=nu, k=k, r=r)


def kl_entropy(points, k: int | None = None, nu: WeightVectorNu | None = None) -> EntropyEstimate:
    """Weighted nearest-neighbor entropy estimate, in nats.

    Requires m >= k+1 pairwise-distinct points; k defaults to default_k(m).
    nu may be passed in to avoid recomputing the weights per call.
    """
    x = _as_points(points)
    m, r = x.shape
    if k is None:
        k = default_k(m)
    if m < k + 1:
        raise ValueError(f"need m >= k+1 points, got m={m}, k={k}")
    if nu is None:
        nu = euclidean_weights(k, r)
    elif nu.k != k or nu.r != r:
        raise ValueError("nu was built for a different (k, r)")

    rho = _knn_brute(x, k) if m < _BRUTE_FORCE_LIMIT else _knn_tree(x, k)
    const = math.log(m - 1) + 0.5 * r * math.log(math.pi) - math.lgamma(1.0 + 0.5 * r)
    value = const - float(nu.nu @ _digamma_row(k)) + r * float(np.mean(np.log(rho) @ nu.nu))
    return EntropyEstimate(value=value, k=k, nu=nu)


def gaussian_entropy(points) -> float:
    """Entropy of a normal fit: 0.5 * log((2*pi*e)^r * det(sample cov))."""
    x = _as_points(points)
    m, r = x.shape
    if m < r + 2:
        raise ValueError("need at least r+2 points for a covariance estimate")
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise DuplicatePointsError("degenerate sample covariance")
    return 0.5 * (r * math.log(2.0 * math.pi * math.e) + logdet)
