"""Sparse linear programming layer: problem container, solver, certificates.

The container accepts row-major triplets, canonicalizes them to CSR (summing
duplicate entries), and validates shapes and bounds.  ``solve_lp`` runs the
HiGHS solvers shipped with scipy: dual simplex for ``algorithm="simplex"``
(vertex solutions, deterministic) and interior point with crossover for
``algorithm="interior-point"``, behind a backend-independent contract:
optimal solutions come with independently recomputed residual certificates,
infeasible ones with a Farkas-style witness built from an elastic feasibility
LP.  ``certify`` recomputes every residual from the raw problem data so tests
can check any claimed solution without trusting solver internals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .exceptions import InvalidArgumentError, LpSolveError

__all__ = [
    "LinearProgram",
    "SolverOptions",
    "LPSolution",
    "ResidualReport",
    "solve_lp",
    "certify",
    "validate_infeasibility_certificate",
    "lp_to_text",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "ITERATION_LIMIT",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

_SENSES = ("<=", ">=", "=")


class LinearProgram:
    """``min c'x  s.t.  A x (<=|>=|=) b,  lo <= x <= hi``.

    Parameters
    ----------
    objective : (num_cols,) array
        Dense cost vector c.
    rows, cols, vals : sequences
        Constraint matrix in triplet form; duplicate (row, col) pairs are
        summed during canonicalization.
    senses : sequence of str
        One of ``"<="``, ``">="``, ``"="`` per row.
    rhs : (num_rows,) array
    lower, upper : (num_cols,) arrays
        Variable bounds; ``-inf`` / ``+inf`` allowed.
    names : sequence of str, optional
        Variable labels (debugging only).
    """

    def __init__(self, objective, rows, cols, vals, senses, rhs,
                 lower, upper, names: Sequence[str] | None = None):
        c = np.asarray(objective, dtype=np.float64)
        if c.ndim != 1:
            raise InvalidArgumentError("objective must be 1-d")
        if not np.isfinite(c).all():
            raise InvalidArgumentError("objective has non-finite entries")
        b = np.asarray(rhs, dtype=np.float64)
        if b.ndim != 1 or not np.isfinite(b).all():
            raise InvalidArgumentError("rhs must be a finite 1-d vector")
        senses = list(senses)
        if len(senses) != b.shape[0]:
            raise InvalidArgumentError(
                f"{len(senses)} senses for {b.shape[0]} rhs entries"
            )
        for s in senses:
            if s not in _SENSES:
                raise InvalidArgumentError(f"unknown sense {s!r}")
        lo = np.asarray(lower, dtype=np.float64)
        hi = np.asarray(upper, dtype=np.float64)
        if lo.shape != c.shape or hi.shape != c.shape:
            raise InvalidArgumentError("bounds must match the objective length")
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise InvalidArgumentError("bounds contain NaN")
        if (lo > hi).any():
            bad = int(np.argmax(lo > hi))
            raise InvalidArgumentError(f"lower > upper for variable {bad}")

        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise InvalidArgumentError("triplet arrays must be 1-d and equal length")
        m, n = b.shape[0], c.shape[0]
        if rows.size:
            if rows.min() < 0 or rows.max() >= m:
                raise InvalidArgumentError("triplet row index out of range")
            if cols.min() < 0 or cols.max() >= n:
                raise InvalidArgumentError("triplet col index out of range")
        if not np.isfinite(vals).all():
            raise InvalidArgumentError("triplet values must be finite")
        A = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
        A.sum_duplicates()

        if names is not None:
            names = [str(x) for x in names]
            if len(names) != n:
                raise InvalidArgumentError("names must match the variable count")

        self.objective = c
        self.matrix = A
        self.senses = senses
        self.rhs = b
        self.lower = lo
        self.upper = hi
        self.names = names

    @property
    def num_rows(self) -> int:
        return self.rhs.shape[0]

    @property
    def num_cols(self) -> int:
        return self.objective.shape[0]

    def __repr__(self):
        return (f"LinearProgram(rows={self.num_rows}, cols={self.num_cols}, "
                f"nnz={self.matrix.nnz})")


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and algorithm selection for ``solve_lp``.

    ``max_iterations=None`` means the default 200 * (rows + cols).
    """

    feas_tol: float = 1e-8
    gap_tol: float = 1e-7
    max_iterations: int | None = None
    scaling: bool = True
    algorithm: str = "simplex"

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.gap_tol > 0):
            raise InvalidArgumentError("tolerances must be positive")
        if self.algorithm not in ("simplex", "interior-point"):
            raise InvalidArgumentError(f"unknown algorithm {self.algorithm!r}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be positive")


@dataclass(frozen=True)
class ResidualReport:
    """Independently recomputed optimality residuals."""

    primal_infeasibility: float
    dual_infeasibility: float
    complementarity_gap: float

    def within(self, feas_tol: float, gap_tol: float) -> bool:
        return (self.primal_infeasibility <= feas_tol
                and self.dual_infeasibility <= feas_tol
                and self.complementarity_gap <= gap_tol)


@dataclass(frozen=True)
class LPSolution:
    status: str
    primal: np.ndarray | None
    dual: np.ndarray | None
    objective_value: float
    residuals: ResidualReport | None
    iterations: int
    infeasibility_certificate: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _pow2_scale(v: np.ndarray) -> np.ndarray:
    """Nearest power of two to 1/sqrt(min*max) per entry; exact to apply/undo."""
    out = np.ones_like(v)
    pos = v > 0
    out[pos] = np.exp2(-np.round(0.5 * np.log2(v[pos])))
    return out


def _geometric_scaling(lp: LinearProgram, passes: int = 2):
    """Geometric-mean row/column scaling with power-of-two factors."""
    A = lp.matrix.tocoo()
    m, n = lp.num_rows, lp.num_cols
    r = np.ones(m)
    c = np.ones(n)
    if A.nnz == 0:
        return r, c
    absv = np.abs(A.data)
    for _ in range(passes):
        scaled = absv * r[A.row] * c[A.col]
        rmax = np.zeros(m)
        rmin = np.full(m, np.inf)
        np.maximum.at(rmax, A.row, scaled)
        np.minimum.at(rmin, A.row, scaled)
        rfac = _pow2_scale(np.where(np.isfinite(rmin), rmax * rmin, 0.0))
        r = r * rfac
        scaled = absv * r[A.row] * c[A.col]
        cmax = np.zeros(n)
        cmin = np.full(n, np.inf)
        np.maximum.at(cmax, A.col, scaled)
        np.minimum.at(cmin, A.col, scaled)
        cfac = _pow2_scale(np.where(np.isfinite(cmin), cmax * cmin, 0.0))
        c = c * cfac
    return r, c


def _scaled_problem(lp: LinearProgram):
    r, c = _geometric_scaling(lp)
    A = sp.diags(r) @ lp.matrix @ sp.diags(c)
    # columns scaled by c: x = c * x'; bounds divide by c, objective multiplies
    lo = lp.lower / c
    hi = lp.upper / c
    scaled = LinearProgram.__new__(LinearProgram)
    scaled.objective = lp.objective * c
    scaled.matrix = A.tocsr()
    scaled.senses = lp.senses
    scaled.rhs = lp.rhs * r
    scaled.lower = lo
    scaled.upper = hi
    scaled.names = lp.names
    return scaled, r, c


def _to_scipy_form(lp: LinearProgram):
    """Split rows into <= (with >= rows negated) and == blocks."""
    senses = np.array(lp.senses)
    le = np.where(senses == "<=")[0]
    ge = np.where(senses == ">=")[0]
    eq = np.where(senses == "=")[0]
    A = lp.matrix
    A_ub = sp.vstack([A[le], -A[ge]], format="csr") if (le.size + ge.size) else None
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]]) if (le.size + ge.size) else None
    A_eq = A[eq] if eq.size else None
    b_eq = lp.rhs[eq] if eq.size else None
    return A_ub, b_ub, A_eq, b_eq, le, ge, eq


def _duals_from_result(res, le, ge, eq, m):
    y = np.zeros(m)
    if le.size + ge.size:
        marg = np.asarray(res.ineqlin.marginals, dtype=np.float64)
        y[le] = marg[: le.size]
        y[ge] = -marg[le.size:]
    if eq.size:
        y[eq] = np.asarray(res.eqlin.marginals, dtype=np.float64)
    return y


def _run_highs(lp: LinearProgram, opts: SolverOptions, maxiter: int):
    A_ub, b_ub, A_eq, b_eq, le, ge, eq = _to_scipy_form(lp)
    bounds = list(zip(
        np.where(np.isneginf(lp.lower), None, lp.lower),
        np.where(np.isposinf(lp.upper), None, lp.upper),
    ))
    method = "highs-ds" if opts.algorithm == "simplex" else "highs-ipm"
    # headroom: HiGHS tolerances act on its scaled problem, ours on raw data
    tol = max(min(opts.feas_tol * 0.1, 1e-8), 1e-10)
    options = {
        "maxiter": maxiter,
        "primal_feasibility_tolerance": tol,
        "dual_feasibility_tolerance": tol,
        "presolve": True,
    }
    if method == "highs-ipm":
        options["ipm_optimality_tolerance"] = max(min(opts.gap_tol * 1e-2, 1e-9), 1e-12)
    res = linprog(lp.objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method=method, options=options)
    return res, le, ge, eq


def solve_lp(lp: LinearProgram, opts: SolverOptions | None = None) -> LPSolution:
    """Solve an LP; deterministic given identical inputs and options.

    Returns
    -------
    LPSolution
        ``status="optimal"`` carries primal/dual vectors and a residual
        certificate recomputed by :func:`certify`; ``status="infeasible"``
        carries a Farkas-style witness; iteration-limit returns the best
        iterate when the backend provides one.

    Raises
    ------
    InvalidArgumentError
        Malformed problem (checked at construction).
    LpSolveError
        Backend failure that is not an LP status (numerical breakdown).
    """
    if opts is None:
        opts = SolverOptions()
    maxiter = opts.max_iterations
    if maxiter is None:
        maxiter = 200 * (lp.num_rows + lp.num_cols)

    work, rscale, cscale = (_scaled_problem(lp) if opts.scaling
                            else (lp, np.ones(lp.num_rows), np.ones(lp.num_cols)))
    res, le, ge, eq = _run_highs(work, opts, maxiter)

    if res.status == 2:
        farkas = _farkas_certificate(lp, opts, maxiter)
        return LPSolution(status=INFEASIBLE, primal=None, dual=None,
                          objective_value=math.nan, residuals=None,
                          iterations=int(res.nit),
                          infeasibility_certificate=farkas)
    if res.status == 3:
        return LPSolution(status=UNBOUNDED, primal=None, dual=None,
                          objective_value=-math.inf, residuals=None,
                          iterations=int(res.nit))
    if res.status == 1:
        primal = None
        if res.x is not None:
            primal = np.asarray(res.x) * cscale
        return LPSolution(status=ITERATION_LIMIT, primal=primal, dual=None,
                          objective_value=float(res.fun) if res.fun is not None
                          else math.nan,
                          residuals=None, iterations=int(res.nit))
    if res.status != 0:
        raise LpSolveError(f"LP backend failed: {res.message}")

    x = np.asarray(res.x, dtype=np.float64) * cscale
    y = _duals_from_result(res, le, ge, eq, lp.num_rows) * rscale
    sol = LPSolution(status=OPTIMAL, primal=x, dual=y,
                     objective_value=float(lp.objective @ x),
                     residuals=None, iterations=int(res.nit))
    report = certify(lp, sol)
    return replace(sol, residuals=report)


def _farkas_certificate(lp: LinearProgram, opts: SolverOptions, maxiter: int):
    """Dual multipliers of the elastic feasibility LP witness infeasibility.

    The witness ``y`` satisfies: sup over the box of (A'y)'x is strictly
    below y'b (with sign conventions per row sense), so no feasible point
    exists.  Validated by :func:`validate_infeasibility_certificate`.
    """
    m, n = lp.num_rows, lp.num_cols
    A = lp.matrix.tocoo()
    rows = list(A.row)
    cols = list(A.col)
    vals = list(A.data)
    obj = np.zeros(n + m)
    lo = np.concatenate([lp.lower, np.zeros(m)])
    hi = np.concatenate([lp.upper, np.full(m, np.inf)])
    for i, s in enumerate(lp.senses):
        rows.append(i)
        cols.append(n + i)
        if s == "<=":
            vals.append(-1.0)
        elif s == ">=":
            vals.append(1.0)
        else:
            vals.append(1.0)  # one-sided elastic; mirrored below for "="
        obj[n + i] = 1.0
    # "=" rows need slack in both directions: add s- columns for them
    eq_ids = [i for i, s in enumerate(lp.senses) if s == "="]
    n_eq = len(eq_ids)
    if n_eq:
        obj = np.concatenate([obj, np.ones(n_eq)])
        lo = np.concatenate([lo, np.zeros(n_eq)])
        hi = np.concatenate([hi, np.full(n_eq, np.inf)])
        for k, i in enumerate(eq_ids):
            rows.append(i)
            cols.append(n + m + k)
            vals.append(-1.0)
    elastic = LinearProgram(obj, rows, cols, vals, lp.senses, lp.rhs, lo, hi)
    res, le, ge, eq = _run_highs(elastic, SolverOptions(
        feas_tol=opts.feas_tol, gap_tol=opts.gap_tol,
        max_iterations=maxiter, scaling=False, algorithm=opts.algorithm), maxiter)
    if res.status != 0 or res.fun is None or res.fun <= 0:
        return None
    return _duals_from_result(res, le, ge, eq, m)


def validate_infeasibility_certificate(lp: LinearProgram, y: np.ndarray,
                                       tol: float = 1e-7) -> bool:
    """True when ``y`` proves ``lp`` infeasible.

    Requires sign-consistency with row senses, and that the best value of
    (A'y)'x over the variable box stays strictly below y'b.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (lp.num_rows,):
        raise InvalidArgumentError("certificate has wrong length")
    for i, s in enumerate(lp.senses):
        if s == "<=" and y[i] > tol:
            return False
        if s == ">=" and y[i] < -tol:
            return False
    w = lp.matrix.T @ y
    box_sup = 0.0
    for k in range(lp.num_cols):
        if abs(w[k]) <= tol:
            continue
        edge = lp.upper[k] if w[k] > 0 else lp.lower[k]
        if not np.isfinite(edge):
            return False
        box_sup += w[k] * edge
    return y @ lp.rhs - box_sup > tol


def certify(lp: LinearProgram, sol: LPSolution) -> ResidualReport:
    """Recompute primal/dual residuals and the complementarity gap from scratch.

    Independent of any solver state: only ``lp`` and the solution vectors are
    consulted, so this doubles as a solver-agnostic oracle in the tests.
    """
    if sol.primal is None:
        raise InvalidArgumentError("solution carries no primal vector")
    x = np.asarray(sol.primal, dtype=np.float64)
    if x.shape != (lp.num_cols,):
        raise InvalidArgumentError(
            f"primal has length {x.shape[0]}, expected {lp.num_cols}")
    ax = lp.matrix @ x
    prim = 0.0
    for i, s in enumerate(lp.senses):
        if s == "<=":
            prim = max(prim, ax[i] - lp.rhs[i])
        elif s == ">=":
            prim = max(prim, lp.rhs[i] - ax[i])
        else:
            prim = max(prim, abs(ax[i] - lp.rhs[i]))
    finite_lo = np.isfinite(lp.lower)
    finite_hi = np.isfinite(lp.upper)
    if finite_lo.any():
        prim = max(prim, float((lp.lower[finite_lo] - x[finite_lo]).max(initial=0.0)))
    if finite_hi.any():
        prim = max(prim, float((x[finite_hi] - lp.upper[finite_hi]).max(initial=0.0)))

    if sol.dual is None:
        return ResidualReport(float(prim), math.inf, math.inf)
    y = np.asarray(sol.dual, dtype=np.float64)
    if y.shape != (lp.num_rows,):
        raise InvalidArgumentError(
            f"dual has length {y.shape[0]}, expected {lp.num_rows}")

    dual = 0.0
    for i, s in enumerate(lp.senses):
        if s == "<=":
            dual = max(dual, y[i])          # needs y <= 0
        elif s == ">=":
            dual = max(dual, -y[i])         # needs y >= 0
    rc = lp.objective - lp.matrix.T @ y
    # reduced costs must be supported by finite bounds
    bad_lo = (rc > 0) & ~finite_lo
    bad_hi = (rc < 0) & ~finite_hi
    if bad_lo.any():
        dual = max(dual, float(rc[bad_lo].max()))
    if bad_hi.any():
        dual = max(dual, float(-rc[bad_hi].min()))

    dual_obj = float(y @ lp.rhs)
    pos = (rc > 0) & finite_lo
    neg = (rc < 0) & finite_hi
    dual_obj += float(rc[pos] @ lp.lower[pos]) + float(rc[neg] @ lp.upper[neg])
    primal_obj = float(lp.objective @ x)
    gap = abs(primal_obj - dual_obj) / (1.0 + abs(primal_obj))
    return ResidualReport(float(prim), float(dual), float(gap))


def lp_to_text(lp: LinearProgram) -> str:
    """Fixed text rendering for debugging: one constraint per line."""
    def var(k):
        return lp.names[k] if lp.names else f"x{k}"

    lines = ["minimize " + " + ".join(
        f"{c:.17g}*{var(k)}" for k, c in enumerate(lp.objective) if c != 0.0)]
    A = lp.matrix.tocsr()
    for i in range(lp.num_rows):
        start, end = A.indptr[i], A.indptr[i + 1]
        terms = " + ".join(
            f"{A.data[t]:.17g}*{var(A.indices[t])}" for t in range(start, end))
        lines.append(f"r{i} {lp.senses[i]} {lp.rhs[i]:.17g} : {terms}")
    for k in range(lp.num_cols):
        lines.append(f"bound {var(k)} in [{lp.lower[k]:.17g}, {lp.upper[k]:.17g}]")
    return "\n".join(lines) + "\n"
