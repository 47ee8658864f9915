"""Empirical-likelihood weights for summary-difference constraints.

Given an m x r matrix H whose rows are differences between replicated and
observed summary statistics, find the probability weights w on the m rows
that maximize sum_i log(m * w_i) subject to sum_i w_i * H[i] = 0.  The
problem is solved through its r-dimensional dual: w_i = 1 / (m * (1 +
lam @ H[i])) with lam minimizing the convex objective
-sum_i log(1 + lam @ H[i]).

A maximizer with strictly positive weights exists iff the origin lies in
the interior of the convex hull of the rows; otherwise the problem is
reported infeasible and the mean log-weight is -inf (the posterior built
on top of it is zero there, including on the hull boundary).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog


class NonFiniteConstraintError(ValueError):
    """Constraint matrix contains NaN or infinite entries."""


@dataclass(frozen=True)
class ELSolution:
    """Result of one empirical-likelihood solve.

    weights          probability weights (all zero when infeasible)
    lam              dual vector, so that weights = 1/(m*(1 + lam @ h_i))
    mean_log_weight  (1/m) * sum_i log(weights_i), -inf when infeasible
    feasible         True iff the dual converged with an interior solution
    iterations       Newton iterations spent
    residual_norm    final norm of sum_i h_i/(1 + lam @ h_i) on rows scaled
                     to unit maximum norm
    """

    weights: np.ndarray
    lam: np.ndarray
    mean_log_weight: float
    feasible: bool
    iterations: int
    residual_norm: float


def _validate(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
        raise ValueError(f"constraint matrix must be m x r with m,r >= 1, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise NonFiniteConstraintError("constraint matrix has non-finite entries")
    return H


def _neg_log_star_sum(z: np.ndarray, eps: float) -> float:
    # -sum of log_star(z): log with its second-order Taylor extension around
    # eps, so the dual objective is defined for all lam
    if z.min() >= eps:
        return -float(np.log(z).sum())
    below = z < eps
    zl = z[below]
    ext = (np.log(eps) - 1.5) * zl.size + (2.0 / eps) * zl.sum() - (zl @ zl) / (2.0 * eps * eps)
    return -(float(np.log(z[~below]).sum()) + float(ext))


def _infeasible(m: int, r: int, iterations: int, residual: float) -> ELSolution:
    return ELSolution(
        weights=np.zeros(m),
        lam=np.zeros(r),
        mean_log_weight=-np.inf,
        feasible=False,
        iterations=iterations,
        residual_norm=residual,
    )


def solve_el(H, tol: float = 1e-8, max_iter: int = 50) -> ELSolution:
    """Solve for the optimal weights of the constraint matrix H.

    tol is the convergence threshold on the dual gradient norm, measured
    on rows rescaled to unit maximum Euclidean norm, which makes the
    feasibility decision and the weights invariant to a positive rescaling
    of H.  A converged dual point is accepted only if every 1 + lam @ h_i
    exceeds 1/(2m); boundary and exterior configurations are both reported
    infeasible.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    H = _validate(H)
    m, r = H.shape

    # cheap necessary condition: each coordinate of the rows must change sign
    if (H.min(axis=0) > 0.0).any() or (H.max(axis=0) < 0.0).any():
        return _infeasible(m, r, 0, np.inf)

    if r == 1:
        scale = float(np.abs(H).max())
    else:
        scale = float(np.sqrt(np.einsum("ij,ij->i", H, H).max()))
    if scale == 0.0:
        # every row is exactly zero: uniform weights satisfy the constraints
        w = np.full(m, 1.0 / m)
        return ELSolution(w, np.zeros(r), -float(np.log(m)), True, 0, 0.0)
    Hs = H / scale

    eps = 1.0 / m
    lam = np.zeros(r)
    z = np.ones(m)
    obj = 0.0
    iterations = 0
    residual = np.inf
    converged = False

    for iterations in range(1, max_iter + 1):
        zmin = z.min()
        if zmin >= eps:
            d1 = 1.0 / z
            grad = -(Hs.T @ d1)
            residual = math.sqrt(float(grad @ grad))
            if residual <= tol:
                converged = True
                break
            d2 = d1 * d1
        else:
            below = z < eps
            d1 = np.where(below, 2.0 / eps - z / (eps * eps), 1.0 / z)
            d2 = np.where(below, 1.0 / (eps * eps), 1.0 / (z * z))
            grad = -(Hs.T @ d1)
            if zmin > 0.0:
                gv = Hs.T @ (1.0 / z)
                residual = math.sqrt(float(gv @ gv))
                if residual <= tol:
                    converged = True
                    break

        if r == 1:
            step = -grad / float(Hs[:, 0] @ (Hs[:, 0] * d2))
        else:
            hess = (Hs * d2[:, None]).T @ Hs
            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess, -grad, rcond=None)[0]

        slope = float(grad @ step)
        t = 1.0
        for _ in range(50):
            lam_new = lam + t * step
            z_new = 1.0 + Hs @ lam_new
            obj_new = _neg_log_star_sum(z_new, eps)
            if obj_new <= obj + 1e-4 * t * slope:
                break
            t *= 0.5
        lam, z, obj = lam_new, z_new, obj_new

    if not converged or z.min() <= 0.5 / m:
        return _infeasible(m, r, iterations, residual if math.isfinite(residual) else np.inf)

    w = 1.0 / (m * z)
    mlw = -float(np.log(m)) - float(np.mean(np.log(z)))
    return ELSolution(w, lam / scale, mlw, True, iterations, residual)


def feasibility_check(H) -> bool:
    """True iff the origin is an interior point of the convex hull of the rows.

    For r = 1 this is min h < 0 < max h.  For r > 1 the hull must be
    full-dimensional and the origin must admit a strictly positive convex
    representation, decided by a small linear program maximizing the
    smallest representation weight.
    """
    H = _validate(H)
    m, r = H.shape
    scale = float(np.max(np.linalg.norm(H, axis=1)))
    if scale == 0.0:
        return False  # single point at the origin has empty interior
    Hs = H / scale

    if r == 1:
        h = Hs[:, 0]
        return bool(h.min() < 0.0 < h.max())

    if np.linalg.matrix_rank(Hs - Hs[0], tol=1e-12) < r:
        return False  # hull lies in a lower-dimensional affine subspace

    # maximize t s.t. Hs' mu = 0, sum mu = 1, mu_i >= t; interior iff t* > 0
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_eq = np.zeros((r + 1, m + 1))
    a_eq[:r, :m] = Hs.T
    a_eq[r, :m] = 1.0
    b_eq = np.zeros(r + 1)
    b_eq[r] = 1.0
    a_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    b_ub = np.zeros(m)
    bounds = [(None, None)] * m + [(None, 1.0)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    return bool(res.status == 0 and res.x is not None and res.x[-1] > 1e-9)
