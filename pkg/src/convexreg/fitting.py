"""Distributionally robust convex regression: LP construction and fitting.

The estimator minimizes ``delta * ||grad f||_sup + mean_i |Y_i - f(X_i)|``
over convex functions whose subgradients are capped in l-infinity norm.
Restricting f to values g_i and subgradients xi_i at the data points turns
this into a linear program:

    minimize   (1/n) sum_i r_i  +  delta * t
    subject to r_i >= Y_i - g_i,   r_i >= g_i - Y_i
               g_j >= g_i + <xi_i, X_j - X_i>     for all ordered pairs i != j
               t >= xi_i^k,  t >= -xi_i^k
               |xi_i^k| <= grad_cap,  r_i >= 0,  t >= 0,  g_i free

The r_i and t columns are epigraph variables linearizing the absolute values
and the max in the objective.  The fitted model is the max-affine function
built from the optimal (g_i, xi_i); the pairwise constraints force that
function to pass through every g_i at its own anchor.

For large n, the n^2 - n pairwise rows are generated lazily: seed with each
point's nearest neighbours, solve, scan every pairwise constraint for
violations, add the worst offenders, repeat until clean.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import FitError, InvalidArgumentError
from .lp import (ITERATION_LIMIT, OPTIMAL, LinearProgram, LPSolution,
                 SolverOptions, solve_lp)
from .model import (AffinePiece, Dataset, FitMeta, MaxAffineModel,
                    empirical_l1, predict_many)

__all__ = [
    "FitConfig",
    "DrcrLpIndex",
    "build_drcr_lp",
    "fit_drcr",
    "default_radius",
    "worst_case_loss_oracle",
]

log = logging.getLogger(__name__)

SCHEDULES = ("experimental", "theoretical", "fixed")


def default_radius(n, d: int, schedule: str = "experimental",
                   gamma: float | None = None) -> float:
    """Ambiguity radius schedule.

    ``experimental``  -> n^(-2/d), the value used in the simulation studies.
    ``theoretical``   -> n^(-2/d) * (log n)^(1 + 3/gamma); requires gamma > 0.
    The leading constant is 1; callers can scale via FitConfig.radius_const.
    """
    if n < 2:
        raise InvalidArgumentError(f"need n >= 2, got {n}")
    if d < 1:
        raise InvalidArgumentError(f"need d >= 1, got {d}")
    if schedule == "experimental":
        return float(n) ** (-2.0 / d)
    if schedule == "theoretical":
        if gamma is None or not gamma > 0:
            raise InvalidArgumentError(
                "theoretical schedule requires gamma > 0")
        return float(n) ** (-2.0 / d) * math.log(n) ** (1.0 + 3.0 / gamma)
    raise InvalidArgumentError(f"unknown schedule {schedule!r}")


@dataclass(frozen=True)
class FitConfig:
    """Fit-time knobs.

    delta is used when ``schedule="fixed"``; otherwise the radius comes from
    :func:`default_radius` scaled by ``radius_const``.  ``grad_cap=None``
    means the class default log(n), natural logarithm.  ``row_generation``
    may be True, False, or "auto" (lazy rows kick in above n = 120).
    """

    delta: float | None = None
    schedule: str = "experimental"
    gamma: float | None = None
    radius_const: float = 1.0
    grad_cap: float | None = None
    row_generation: bool | str = "auto"
    violation_tol: float = 1e-8
    max_rounds: int = 200
    solver: SolverOptions = field(
        default_factory=lambda: SolverOptions(algorithm="interior-point"))

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise InvalidArgumentError(f"unknown schedule {self.schedule!r}")
        if self.delta is not None and self.delta < 0:
            raise InvalidArgumentError(f"delta must be >= 0, got {self.delta}")
        if self.schedule == "fixed" and self.delta is None:
            raise InvalidArgumentError("fixed schedule needs an explicit delta")
        if self.grad_cap is not None and not self.grad_cap > 0:
            raise InvalidArgumentError("grad_cap must be positive")
        if self.radius_const <= 0:
            raise InvalidArgumentError("radius_const must be positive")
        if not self.violation_tol > 0:
            raise InvalidArgumentError("violation_tol must be positive")
        if self.row_generation not in (True, False, "auto"):
            raise InvalidArgumentError("row_generation must be True/False/'auto'")

    def resolve_delta(self, n: int, d: int) -> float:
        if self.schedule == "fixed":
            return float(self.delta)
        return self.radius_const * default_radius(n, d, self.schedule, self.gamma)

    def resolve_grad_cap(self, n: int) -> float:
        return float(self.grad_cap) if self.grad_cap is not None else math.log(n)

    def resolve_row_generation(self, n: int) -> bool:
        if self.row_generation == "auto":
            return n > 120
        return bool(self.row_generation)


@dataclass(frozen=True)
class DrcrLpIndex:
    """Maps LP columns back to semantic variables.

    Columns are laid out as [g_0..g_{n-1} | xi_0^0..xi_{n-1}^{d-1} |
    r_0..r_{n-1} | t]; the four blocks partition the column range exactly.
    """

    n: int
    d: int

    @property
    def num_cols(self) -> int:
        return self.n * (self.d + 2) + 1

    def g(self, i: int) -> int:
        return i

    def xi(self, i: int, k: int) -> int:
        return self.n + i * self.d + k

    def r(self, i: int) -> int:
        return self.n * (1 + self.d) + i

    @property
    def t(self) -> int:
        return self.num_cols - 1

    def g_block(self):
        return slice(0, self.n)

    def xi_block(self):
        return slice(self.n, self.n * (1 + self.d))

    def r_block(self):
        return slice(self.n * (1 + self.d), self.n * (2 + self.d))

    def split(self, x: np.ndarray):
        """(g, xi_matrix, r, t) views of a primal vector."""
        g = x[self.g_block()]
        xi = x[self.xi_block()].reshape(self.n, self.d)
        r = x[self.r_block()]
        return g, xi, r, float(x[self.t])


def _pair_row_triplets(X: np.ndarray, pairs: np.ndarray, idx: DrcrLpIndex,
                       row_offset: int):
    """Triplets for rows g_j - g_i - <xi_i, X_j - X_i> >= 0, one per pair."""
    n, d = X.shape
    m = len(pairs)
    ii = pairs[:, 0]
    jj = pairs[:, 1]
    rows = np.repeat(np.arange(row_offset, row_offset + m), d + 2)
    cols = np.empty((m, d + 2), dtype=np.int64)
    vals = np.empty((m, d + 2))
    cols[:, 0] = jj
    vals[:, 0] = 1.0
    cols[:, 1] = ii
    vals[:, 1] = -1.0
    cols[:, 2:] = idx.n + ii[:, None] * d + np.arange(d)[None, :]
    vals[:, 2:] = -(X[jj] - X[ii])
    return rows, cols.ravel(), vals.ravel()


def _all_pairs(n: int) -> np.ndarray:
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    return np.column_stack([ii, jj])


def build_drcr_lp(data: Dataset, cfg: FitConfig,
                  pairs: np.ndarray | None = None):
    """Assemble the fitting LP; returns (LinearProgram, DrcrLpIndex).

    ``pairs=None`` emits every ordered pairwise constraint (n^2 - n rows);
    row generation passes an explicit subset instead.

    Raises
    ------
    InvalidArgumentError
        If n < 2: no pairwise constraints exist and the fit degenerates to a
        plain median.
    """
    n, d = data.n, data.d
    if n < 2:
        raise InvalidArgumentError("need n >= 2 observations to fit")
    idx = DrcrLpIndex(n=n, d=d)
    delta = cfg.resolve_delta(n, d)
    cap = cfg.resolve_grad_cap(n)
    X, Y = data.xs, data.ys
    if pairs is None:
        pairs = _all_pairs(n)

    rows, cols, vals, rhs, senses = [], [], [], [], []

    # absolute-loss epigraph: r_i + g_i >= Y_i and r_i - g_i >= -Y_i
    ar = np.arange(n)
    res_rows = np.repeat(np.arange(2 * n), 2)
    res_cols = np.empty((2 * n, 2), dtype=np.int64)
    res_vals = np.empty((2 * n, 2))
    res_cols[0::2, 0] = idx.n * (1 + d) + ar
    res_cols[0::2, 1] = ar
    res_vals[0::2] = [1.0, 1.0]
    res_cols[1::2, 0] = idx.n * (1 + d) + ar
    res_cols[1::2, 1] = ar
    res_vals[1::2] = [1.0, -1.0]
    rows.append(res_rows)
    cols.append(res_cols.ravel())
    vals.append(res_vals.ravel())
    res_rhs = np.empty(2 * n)
    res_rhs[0::2] = Y
    res_rhs[1::2] = -Y
    rhs.append(res_rhs)
    senses += [">="] * (2 * n)

    # penalty epigraph: t - xi_i^k >= 0 and t + xi_i^k >= 0
    nd = n * d
    pen_rows = np.repeat(np.arange(2 * n, 2 * n + 2 * nd), 2)
    pen_cols = np.empty((2 * nd, 2), dtype=np.int64)
    pen_vals = np.empty((2 * nd, 2))
    xi_cols = np.arange(n * d) + idx.n
    pen_cols[0::2, 0] = idx.t
    pen_cols[0::2, 1] = xi_cols
    pen_vals[0::2] = [1.0, -1.0]
    pen_cols[1::2, 0] = idx.t
    pen_cols[1::2, 1] = xi_cols
    pen_vals[1::2] = [1.0, 1.0]
    rows.append(pen_rows)
    cols.append(pen_cols.ravel())
    vals.append(pen_vals.ravel())
    rhs.append(np.zeros(2 * nd))
    senses += [">="] * (2 * nd)

    # pairwise convexity rows
    if len(pairs):
        pr, pc, pv = _pair_row_triplets(X, pairs, idx, 2 * n + 2 * nd)
        rows.append(pr)
        cols.append(pc)
        vals.append(pv)
        rhs.append(np.zeros(len(pairs)))
        senses += [">="] * len(pairs)

    objective = np.zeros(idx.num_cols)
    objective[idx.r_block()] = 1.0 / n
    objective[idx.t] = delta

    lower = np.full(idx.num_cols, -np.inf)
    upper = np.full(idx.num_cols, np.inf)
    lower[idx.xi_block()] = -cap
    upper[idx.xi_block()] = cap
    lower[idx.r_block()] = 0.0
    lower[idx.t] = 0.0

    lp = LinearProgram(
        objective=objective,
        rows=np.concatenate(rows),
        cols=np.concatenate(cols),
        vals=np.concatenate(vals),
        senses=senses,
        rhs=np.concatenate(rhs),
        lower=lower,
        upper=upper,
    )
    return lp, idx


def _plane_values(g: np.ndarray, xi: np.ndarray, X: np.ndarray) -> np.ndarray:
    """P[i, j] = value of piece i's plane at X_j."""
    offsets = g - np.einsum("ij,ij->i", xi, X)
    return offsets[:, None] + xi @ X.T


def _violation_scan(g: np.ndarray, xi: np.ndarray, X: np.ndarray,
                    tol: float):
    """All ordered pairs whose convexity row is violated by more than tol.

    Returns (pairs, magnitudes) sorted by violation descending, ties broken
    by flat row index so parallel or chunked scans merge identically.
    """
    V = _plane_values(g, xi, X) - g[None, :]
    np.fill_diagonal(V, -np.inf)
    mask = V > tol
    if not mask.any():
        return np.empty((0, 2), dtype=np.int64), np.empty(0)
    ii, jj = np.nonzero(mask)
    mags = V[ii, jj]
    order = np.lexsort((ii * len(g) + jj, -mags))
    return np.column_stack([ii, jj])[order], mags[order]


def _nearest_neighbor_pairs(X: np.ndarray, k: int) -> np.ndarray:
    """Ordered pairs linking each point with its k nearest l1 neighbours."""
    n = X.shape[0]
    D = np.abs(X[:, None, :] - X[None, :, :]).sum(axis=-1)
    np.fill_diagonal(D, np.inf)
    k = min(k, n - 1)
    nn = np.argpartition(D, k - 1, axis=1)[:, :k]
    pairs = set()
    for i in range(n):
        for j in nn[i]:
            pairs.add((i, int(j)))
            pairs.add((int(j), i))
    return np.array(sorted(pairs), dtype=np.int64)


def _envelope_pieces(g, xi, X, cap):
    """Exactly feasible piece set from LP variables.

    The envelope value max_i(g_i + <xi_i, X_j - X_i>) at each anchor becomes
    the piece intercept, paired with the maximizing piece's gradient.  The
    resulting piece set satisfies every pairwise constraint to rounding
    error even when the LP solution carried residual slack, which keeps the
    interpolation identity crisp.
    """
    xi = np.clip(xi, -cap, cap)
    P = _plane_values(g, xi, X)
    best = np.argmax(P, axis=0)
    n = X.shape[0]
    g_env = P[best, np.arange(n)]
    xi_env = xi[best]
    return g_env, xi_env


def _solved_or_raise(sol: LPSolution, context: str) -> LPSolution:
    if sol.status == OPTIMAL:
        return sol
    detail = {"status": sol.status, "iterations": sol.iterations}
    if sol.status == ITERATION_LIMIT and sol.primal is not None:
        detail["best_objective"] = sol.objective_value
    raise FitError(f"LP solve failed during {context}: status={sol.status}",
                   diagnostics=detail)


def fit_drcr(data: Dataset, cfg: FitConfig | None = None) -> MaxAffineModel:
    """Fit the robust convex regression estimator.

    Returns a model with one piece per training point.  ``fit_meta`` records
    the achieved objective (equal to ``dual_objective(model, data, delta)``),
    the LP lower bound, iteration counts, and row-generation statistics.

    Raises
    ------
    InvalidArgumentError
        Invalid data or config (including n < 2).
    FitError
        Solver returned a non-optimal status; diagnostics attached.
    """
    if cfg is None:
        cfg = FitConfig()
    n, d = data.n, data.d
    if n < 2:
        raise InvalidArgumentError("need n >= 2 observations to fit")
    delta = cfg.resolve_delta(n, d)
    cap = cfg.resolve_grad_cap(n)
    lazy = cfg.resolve_row_generation(n)
    X = data.xs

    total_pairs = n * n - n
    iterations = 0

    if not lazy:
        lp, idx = build_drcr_lp(data, cfg)
        sol = _solved_or_raise(solve_lp(lp, cfg.solver), "full solve")
        iterations = sol.iterations
        g, xi, _, _ = idx.split(sol.primal)
        rounds = 1
        pairs_used = total_pairs
        lp_bound = sol.objective_value
    else:
        pairs = _nearest_neighbor_pairs(X, 2 * d)
        seen = set(map(tuple, pairs))
        rounds = 0
        while True:
            rounds += 1
            if rounds > cfg.max_rounds:
                raise FitError(
                    f"row generation did not settle in {cfg.max_rounds} rounds",
                    diagnostics={"rows_used": len(pairs), "rounds": rounds})
            lp, idx = build_drcr_lp(data, cfg, pairs=pairs)
            sol = _solved_or_raise(solve_lp(lp, cfg.solver),
                                   f"row-generation round {rounds}")
            iterations += sol.iterations
            g, xi, _, _ = idx.split(sol.primal)
            viol_pairs, mags = _violation_scan(g, xi, X, cfg.violation_tol)
            if len(viol_pairs) == 0:
                break
            fresh = [tuple(p) for p in viol_pairs[:5 * n] if tuple(p) not in seen]
            log.info("fit_drcr round=%d rows=%d violated=%d max_violation=%.3e "
                     "lp_iterations=%d", rounds, len(pairs), len(viol_pairs),
                     mags[0], sol.iterations)
            if not fresh:
                # remaining violations sit on rows already present: solver
                # residual noise below violation_tol cannot be improved on
                break
            seen.update(fresh)
            pairs = np.concatenate([pairs, np.array(fresh, dtype=np.int64)])
        pairs_used = len(pairs)
        lp_bound = sol.objective_value

    g_env, xi_env = _envelope_pieces(g, xi, X, cap)
    # interpolation identity: the envelope passes through g_env at anchors,
    # so the achieved objective is computable directly from the LP variables
    achieved = delta * float(np.abs(xi_env).max()) + empirical_l1(data.ys, g_env)
    meta = FitMeta(objective=achieved, iterations=iterations, delta=delta,
                   extra={
                       "lp_objective": lp_bound,
                       "rounds": rounds,
                       "rows_used": pairs_used,
                       "rows_total": total_pairs,
                       "grad_cap": cap,
                       "row_generation": lazy,
                   })
    pieces = [AffinePiece(g=float(g_env[j]), xi=xi_env[j], anchor=X[j])
              for j in range(n)]
    model = MaxAffineModel(d=d, pieces=pieces, grad_cap=cap, fit_meta=meta)
    log.info("fit_drcr done n=%d d=%d delta=%.6g objective=%.9g rounds=%d "
             "rows_used=%d/%d", n, d, delta, achieved, rounds, pairs_used,
             total_pairs)
    return model


# -- brute-force worst-case transport oracle ---------------------------------

_ORACLE_MAX_N = 8
_ORACLE_MAX_D = 2


def worst_case_loss_oracle(model: MaxAffineModel, data: Dataset, delta: float,
                           moves_per_point: int = 8) -> float:
    """Lower-bound search for the worst-case expected absolute loss.

    The transport cost charges ||.||_1 for moving covariates and forbids
    moving responses, so an adversary reallocates an average l1 budget of
    ``delta`` across points.  The search enumerates, per point, whole-atom
    moves over a distance grid and split moves (a fraction p of the atom
    travels budget/p) along a fixed direction set: +-coordinate axes, first
    two-coordinate diagonals, and each piece's steepest axis.  A knapsack
    over a dyadic budget grid allocates the total budget across points.

    Every candidate is a feasible transport plan, so the result never
    exceeds the penalised objective; the candidate grids are nested in
    ``moves_per_point``, so refining can only raise the value, approaching
    the dual bound as splits send vanishing mass far away.

    Raises
    ------
    InvalidArgumentError
        If n > 8 or d > 2 (brute force only), or delta < 0.
    """
    if data.n > _ORACLE_MAX_N or data.d > _ORACLE_MAX_D:
        raise InvalidArgumentError(
            f"oracle is brute force only: need n <= {_ORACLE_MAX_N} and "
            f"d <= {_ORACLE_MAX_D}, got n={data.n}, d={data.d}")
    if model.d != data.d:
        raise InvalidArgumentError("model and data dimensions differ")
    delta = float(delta)
    if delta < 0:
        raise InvalidArgumentError("delta must be >= 0")
    if moves_per_point < 1:
        raise InvalidArgumentError("moves_per_point must be >= 1")

    n, d = data.n, data.d
    X, Y = data.xs, data.ys
    base = np.abs(Y - predict_many(model, X))
    if delta == 0.0:
        return float(np.mean(base))

    directions = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        directions += [e.copy(), -e]
    if d >= 2:
        for s0 in (1.0, -1.0):
            for s1 in (1.0, -1.0):
                v = np.zeros(d)
                v[0], v[1] = 0.5 * s0, 0.5 * s1   # unit l1 length
                directions.append(v)
    for piece in model.pieces:
        k = int(np.argmax(np.abs(piece.xi)))
        if piece.xi[k] != 0.0:
            e = np.zeros(d)
            e[k] = math.copysign(1.0, piece.xi[k])
            directions.append(e)
    directions = np.unique(np.array(directions), axis=0)

    # Budget bookkeeping: moving a sub-mass mu of atom i (mass 1/n) a
    # distance m costs mu * m; the adversary's plans satisfy
    # sum_i cost_i <= delta.  The grid holds per-point costs c_b = b*delta/G.
    levels = max(1, int(math.ceil(math.log2(moves_per_point))))
    grid = 2 ** levels
    costs = np.arange(1, grid + 1) * (delta / grid)
    fractions = 0.5 ** np.arange(0, moves_per_point + 1)  # 1, 1/2, 1/4, ...

    # u[i, b]: best per-point loss contribution (times n) at cost c_b.
    # Whole atom (mass 1/n) at cost c moves distance n*c; a fraction p of
    # the atom at cost c moves distance n*c/p while (1-p) stays put.
    u = np.empty((n, grid + 1))
    for i in range(n):
        best = np.full(grid + 1, base[i])
        for v in directions:
            along = np.abs(Y[i] - predict_many(model, X[i] + np.outer(
                n * costs, v)))
            best[1:] = np.maximum(best[1:], np.maximum.accumulate(along))
            for p in fractions[1:]:
                split = np.abs(Y[i] - predict_many(model, X[i] + np.outer(
                    n * costs / p, v)))
                best[1:] = np.maximum(best[1:], (1 - p) * base[i] + p * split)
        u[i] = best

    # knapsack: allocate at most `grid` cost units across the points
    state = u[0].copy()
    for i in range(1, n):
        new = np.full(grid + 1, -np.inf)
        for spend in range(grid + 1):
            cand = state[: grid + 1 - spend] + u[i, spend]
            new[spend:] = np.maximum(new[spend:], cand)
        state = new
    return float(state.max() / n)
