"""Comparison estimators: capped convex least squares, Gaussian kernel
regression with leave-one-out bandwidth selection, and an absolute-loss
linear fit used by the real-data pipeline.

The least-squares fit solves the quadratic program

    minimize (1/n) sum_i (Y_i - g_i)^2
    s.t.     g_j >= g_i + <xi_i, X_j - X_i>,   |xi_i^k| <= c

with the same pairwise constraint family as the robust LP.  The polytope is
handled by an ADMM operator-splitting solver (osqp) wrapped in lazy
constraint generation, followed by an exact max-affine envelope repair and
an independently recomputed KKT residual certificate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import osqp
import scipy.sparse as sp

from .exceptions import InvalidArgumentError, QpConvergenceError
from .fitting import _all_pairs, _nearest_neighbor_pairs, _plane_values
from .lp import LinearProgram, SolverOptions, solve_lp
from .model import (AffinePiece, Dataset, FitMeta, MaxAffineModel,
                    _as_matrix, _as_vector)

__all__ = [
    "LseConfig",
    "fit_convex_lse",
    "KernelModel",
    "kernel_predict",
    "kernel_predict_many",
    "loo_criterion",
    "select_bandwidth",
    "BANDWIDTH_GRID",
    "fit_linear_absolute",
    "fit_linear_squared",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LseConfig:
    """Gradient cap c, stopping tolerance, and iteration budget for the QP."""

    c: float = 10.0
    tolerance: float = 1e-6
    max_iterations: int = 200_000

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidArgumentError("gradient cap c must be positive")
        if not self.tolerance > 0:
            raise InvalidArgumentError("tolerance must be positive")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be positive")


def _qp_matrices(X, Y, c, pairs):
    n, d = X.shape
    N = n * (1 + d)
    m = len(pairs)
    ii, jj = pairs[:, 0], pairs[:, 1]
    rows = np.repeat(np.arange(m), d + 2)
    cols = np.empty((m, d + 2), dtype=np.int64)
    vals = np.empty((m, d + 2))
    cols[:, 0] = jj
    vals[:, 0] = 1.0
    cols[:, 1] = ii
    vals[:, 1] = -1.0
    cols[:, 2:] = n + ii[:, None] * d + np.arange(d)[None, :]
    vals[:, 2:] = -(X[jj] - X[ii])
    A_conv = sp.coo_matrix((vals.ravel(), (rows, cols.ravel())),
                           shape=(m, N)).tocsc()
    A_box = sp.hstack([sp.csc_matrix((n * d, n)), sp.eye(n * d)], format="csc")
    A = sp.vstack([A_conv, A_box], format="csc")
    lo = np.concatenate([np.zeros(m), -c * np.ones(n * d)])
    hi = np.concatenate([np.full(m, np.inf), c * np.ones(n * d)])
    P = sp.diags(np.concatenate([(2.0 / n) * np.ones(n),
                                 np.zeros(n * d)])).tocsc()
    q = np.zeros(N)
    q[:n] = -2.0 * Y / n
    return P, q, A, lo, hi


def _kkt_residuals(P, q, A, lo, hi, x, y):
    """Unscaled KKT residuals of the QP, recomputed from raw data."""
    Ax = A @ x
    r_prim = float(np.max(np.maximum(lo - Ax, Ax - hi), initial=0.0))
    r_dual = float(np.max(np.abs(P @ x + q + A.T @ y)))
    up = np.clip(y, 0.0, None)
    dn = np.clip(-y, 0.0, None)
    comp = 0.0
    finite_hi = np.isfinite(hi)
    finite_lo = np.isfinite(lo)
    if finite_hi.any():
        comp = max(comp, float(np.max(np.abs(up[finite_hi]
                                             * (Ax - hi)[finite_hi]),
                                      initial=0.0)))
    if finite_lo.any():
        comp = max(comp, float(np.max(np.abs(dn[finite_lo]
                                             * (Ax - lo)[finite_lo]),
                                      initial=0.0)))
    return r_prim, r_dual, comp


def fit_convex_lse(data: Dataset, cfg: LseConfig | None = None) -> MaxAffineModel:
    """Least-squares convex regression under a gradient cap.

    Returns a max-affine model with one piece per training point; by the
    envelope repair the pieces satisfy every pairwise constraint and the cap
    exactly.  fit_meta.objective holds the mean squared training loss and
    the KKT residuals of the pre-repair iterate.

    Raises
    ------
    InvalidArgumentError
        n < 2 or invalid config.
    QpConvergenceError
        Residual target unreached within max_iterations; the exception
        carries the best (repaired) model and its residuals.
    """
    if cfg is None:
        cfg = LseConfig()
    n, d = data.n, data.d
    if n < 2:
        raise InvalidArgumentError("need n >= 2 observations to fit")
    X, Y = data.xs, data.ys
    kkt_target = 1e-5

    full = n <= 120
    pairs = _all_pairs(n) if full else _nearest_neighbor_pairs(X, 2 * d)
    seen = set(map(tuple, pairs))
    x_prev = None
    total_iters = 0
    rounds = 0
    eps = min(cfg.tolerance, 2e-6)
    converged = False
    for _escalation in range(4):
        while True:
            rounds += 1
            if rounds > 80:
                break
            P, q, A, lo, hi = _qp_matrices(X, Y, cfg.c, pairs)
            solver = osqp.OSQP()
            solver.setup(P=P, q=q, A=A, l=lo, u=hi, eps_abs=eps, eps_rel=eps,
                         max_iter=cfg.max_iterations, polishing=True,
                         verbose=False, adaptive_rho_interval=50,
                         scaled_termination=False)
            if x_prev is not None:
                solver.warm_start(x=x_prev)
            res = solver.solve(raise_error=False)
            total_iters += int(res.info.iter)
            if res.x is None or not np.isfinite(res.x).all():
                raise QpConvergenceError(
                    f"QP solver returned no iterate (status {res.info.status})")
            x_prev = res.x
            g = res.x[:n]
            xi = res.x[n:].reshape(n, d)
            r_prim, r_dual, comp = _kkt_residuals(P, q, A, lo, hi, res.x,
                                                  res.y)
            if full:
                break
            scan_tol = max(20 * eps, 1e-6)
            V = _plane_values(g, np.clip(xi, -cfg.c, cfg.c), X) - g[None, :]
            np.fill_diagonal(V, -np.inf)
            viol = np.argwhere(V > scan_tol)
            if len(viol) == 0:
                break
            mags = V[V > scan_tol]
            order = np.lexsort((viol[:, 0] * n + viol[:, 1], -mags))
            fresh = [tuple(p) for p in viol[order][:5 * n]
                     if tuple(p) not in seen]
            log.info("fit_convex_lse round=%d rows=%d violated=%d qp_iters=%d",
                     rounds, len(pairs), len(viol), res.info.iter)
            if not fresh:
                break
            seen.update(fresh)
            pairs = np.concatenate([pairs, np.array(fresh, dtype=np.int64)])
        converged = max(r_prim, r_dual) <= kkt_target
        if converged or total_iters >= cfg.max_iterations:
            break
        # marginal misses are common at the first eps level; tighten and
        # re-solve warm-started
        eps *= 0.1
        log.info("fit_convex_lse tightening eps to %.1e (kkt %.2e/%.2e)",
                 eps, r_prim, r_dual)
    g_env, xi_env = _envelope_from(g, xi, X, cfg.c)
    sse_mean = float(np.mean((Y - g_env) ** 2))
    meta = FitMeta(objective=sse_mean, iterations=total_iters, delta=0.0,
                   extra={
                       "kkt_primal": r_prim,
                       "kkt_dual": r_dual,
                       "kkt_complementarity": comp,
                       "rounds": rounds,
                       "rows_used": len(pairs),
                       "rows_total": n * n - n,
                       "c": cfg.c,
                   })
    pieces = [AffinePiece(g=float(g_env[j]), xi=xi_env[j], anchor=X[j])
              for j in range(n)]
    model = MaxAffineModel(d=d, pieces=pieces, grad_cap=cfg.c, fit_meta=meta)
    if not converged:
        raise QpConvergenceError(
            f"KKT residuals ({r_prim:.2e}, {r_dual:.2e}) above {kkt_target:.0e} "
            f"after {total_iters} iterations",
            best_model=model, residuals=(r_prim, r_dual, comp))
    log.info("fit_convex_lse done n=%d d=%d c=%g objective=%.9g rounds=%d",
             n, d, cfg.c, sse_mean, rounds)
    return model


def _envelope_from(g, xi, X, cap):
    xi = np.clip(xi, -cap, cap)
    P = _plane_values(g, xi, X)
    best = np.argmax(P, axis=0)
    n = X.shape[0]
    return P[best, np.arange(n)], xi[best]


# -- Gaussian kernel regression ----------------------------------------------

BANDWIDTH_GRID = tuple((j + 1) / 100.0 for j in range(100))

# log of the smallest positive double: below this the naive kernel sum is 0
_LOG_UNDERFLOW = -745.0


@dataclass(frozen=True)
class KernelModel:
    """Nadaraya-Watson regression with the Gaussian kernel at bandwidth h."""

    train: Dataset
    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise InvalidArgumentError("bandwidth must be positive")


def _nw_value(sq_dists, ys, h):
    """Stable weight normalisation; (2*pi)^(-d/2) cancels in the ratio.

    The Gaussian log-weights are shifted by their max before exponentiation.
    When even the largest raw weight underflows to zero the textbook formula
    is 0/0; we return the training mean, the h -> infinity limit.
    """
    logw = -0.5 * sq_dists / (h * h)
    m = np.max(logw)
    if m < _LOG_UNDERFLOW:
        return float(np.mean(ys))
    w = np.exp(logw - m)
    return float(np.sum(ys * w) / np.sum(w))


def kernel_predict(model: KernelModel, x) -> float:
    """Nadaraya-Watson estimate at a single point."""
    x = _as_vector(np.atleast_1d(np.asarray(x, dtype=np.float64)), "x")
    if x.shape[0] != model.train.d:
        raise InvalidArgumentError(
            f"x has length {x.shape[0]}, expected {model.train.d}")
    sq = np.sum((model.train.xs - x) ** 2, axis=-1)
    return _nw_value(sq, model.train.ys, model.bandwidth)


def kernel_predict_many(model: KernelModel, X) -> np.ndarray:
    X = _as_matrix(X, "X")
    if X.shape[1] != model.train.d:
        raise InvalidArgumentError(
            f"X has {X.shape[1]} columns, expected {model.train.d}")
    return np.array([_nw_value(np.sum((model.train.xs - row) ** 2, axis=-1),
                               model.train.ys, model.bandwidth)
                     for row in X])


def loo_criterion(data: Dataset, C: float) -> float:
    """Leave-one-out squared error at bandwidth h = C * n^(-1/(d+4)).

    Each held-out prediction drops point i from the weights; an underflowing
    denominator falls back to the mean of the remaining responses.
    """
    n, d = data.n, data.d
    if n < 3:
        raise InvalidArgumentError("need n >= 3 for leave-one-out selection")
    h = C * float(n) ** (-1.0 / (d + 4))
    X, Y = data.xs, data.ys
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    resid = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        resid[i] = Y[i] - _nw_value(sq[i, keep], Y[keep], h)
    return float(np.sum(resid * resid))


def select_bandwidth(data: Dataset):
    """Grid search C in {0.01, ..., 1.00} minimising the LOO criterion.

    Returns (h, C); ties go to the smallest C.
    """
    if data.n < 3:
        raise InvalidArgumentError("need n >= 3 for leave-one-out selection")
    best_C = None
    best_val = math.inf
    for C in BANDWIDTH_GRID:
        val = loo_criterion(data, C)
        if val < best_val:
            best_val = val
            best_C = C
    h = best_C * float(data.n) ** (-1.0 / (data.d + 4))
    return h, best_C


# -- linear regression under absolute / squared loss -------------------------

def fit_linear_absolute(data: Dataset,
                        solver: SolverOptions | None = None) -> MaxAffineModel:
    """Median regression: minimise mean |Y - b0 - <beta, X>| by LP.

    Variables are (b0, beta, s_1..s_n) with s_i >= +-(Y_i - b0 - <beta, X_i>).
    Returns a single-piece max-affine model (grad cap unbounded).
    """
    n, d = data.n, data.d
    X, Y = data.xs, data.ys
    ncols = 1 + d + n
    rows, cols, vals = [], [], []
    rhs = np.empty(2 * n)
    for i in range(n):
        # s_i + b0 + <beta, X_i> >= Y_i
        rows += [2 * i] * (d + 2)
        cols += [1 + d + i, 0] + list(range(1, 1 + d))
        vals += [1.0, 1.0] + list(X[i])
        rhs[2 * i] = Y[i]
        # s_i - b0 - <beta, X_i> >= -Y_i
        rows += [2 * i + 1] * (d + 2)
        cols += [1 + d + i, 0] + list(range(1, 1 + d))
        vals += [1.0, -1.0] + list(-X[i])
        rhs[2 * i + 1] = -Y[i]
    objective = np.zeros(ncols)
    objective[1 + d:] = 1.0 / n
    lower = np.full(ncols, -np.inf)
    lower[1 + d:] = 0.0
    upper = np.full(ncols, np.inf)
    lp = LinearProgram(objective, rows, cols, vals, [">="] * (2 * n), rhs,
                       lower, upper)
    sol = solve_lp(lp, solver or SolverOptions(algorithm="simplex"))
    if sol.status != "optimal":
        raise QpConvergenceError(f"linear absolute-loss fit failed: {sol.status}")
    b0 = float(sol.primal[0])
    beta = np.asarray(sol.primal[1:1 + d])
    piece = AffinePiece(g=b0, xi=beta, anchor=np.zeros(d))
    meta = FitMeta(objective=sol.objective_value, iterations=sol.iterations,
                   delta=0.0, extra={"loss": "absolute"})
    return MaxAffineModel(d=d, pieces=[piece], grad_cap=math.inf, fit_meta=meta)


def fit_linear_squared(data: Dataset) -> MaxAffineModel:
    """Ordinary least squares via the normal equations (lstsq)."""
    n, d = data.n, data.d
    Z = np.column_stack([np.ones(n), data.xs])
    coef, *_ = np.linalg.lstsq(Z, data.ys, rcond=None)
    piece = AffinePiece(g=float(coef[0]), xi=coef[1:], anchor=np.zeros(d))
    fitted = Z @ coef
    meta = FitMeta(objective=float(np.mean((data.ys - fitted) ** 2)),
                   iterations=1, delta=0.0, extra={"loss": "squared"})
    return MaxAffineModel(d=d, pieces=[piece], grad_cap=math.inf, fit_meta=meta)
