"""Independent oracles used by the test suite.

Everything here is deliberately written from scratch against the problem
statements, not by calling package internals, so agreement is evidence.
"""

import itertools

import numpy as np

from convexreg.model import AffinePiece, Dataset, MaxAffineModel


def enumerate_vertices_objective(objective, A, senses, rhs, lower, upper,
                                 tol=1e-9):
    """Best objective over all basic feasible points of a small LP.

    Stacks constraint rows and bound rows, solves every nonsingular
    n-subset as equalities, keeps the feasible solutions, and returns
    (best objective, best vertex) or (None, None) when no feasible vertex
    exists (with finite boxes that means infeasible).
    """
    objective = np.asarray(objective, dtype=np.float64)
    n = objective.shape[0]
    rows = [np.asarray(a, dtype=np.float64) for a in A]
    cuts = [np.asarray(rhs, dtype=np.float64)[i] for i in range(len(rows))]
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        if np.isfinite(lower[k]):
            rows.append(e.copy())
            cuts.append(lower[k])
        if np.isfinite(upper[k]):
            rows.append(e.copy())
            cuts.append(upper[k])
    rows = np.array(rows)
    cuts = np.array(cuts)
    m = rows.shape[0]
    if m < n:
        return None, None

    combos = np.array(list(itertools.combinations(range(m), n)))
    mats = rows[combos]
    dets = np.linalg.det(mats)
    scale = np.abs(mats).max(axis=(1, 2)) + 1e-30
    ok = np.abs(dets) > 1e-10 * scale**n
    if not ok.any():
        return None, None
    cand = np.linalg.solve(mats[ok], cuts[combos[ok]][..., None])[..., 0]

    A_mat = np.array([np.asarray(a, dtype=np.float64) for a in A]) \
        if len(A) else np.zeros((0, n))
    b_vec = np.asarray(rhs, dtype=np.float64)
    av = cand @ A_mat.T if len(A) else np.zeros((cand.shape[0], 0))
    feas = np.ones(cand.shape[0], dtype=bool)
    for i, s in enumerate(senses):
        if s == "<=":
            feas &= av[:, i] <= b_vec[i] + tol
        elif s == ">=":
            feas &= av[:, i] >= b_vec[i] - tol
        else:
            feas &= np.abs(av[:, i] - b_vec[i]) <= tol
    feas &= (cand >= np.asarray(lower) - tol).all(axis=1)
    feas &= (cand <= np.asarray(upper) + tol).all(axis=1)
    if not feas.any():
        return None, None
    vals = cand[feas] @ objective
    best = np.argmin(vals)
    return float(vals[best]), cand[feas][best]


def random_box_lp(rng, max_vars=6, max_rows=10):
    """A random bounded LP (finite boxes); roughly 1 in 4 is infeasible."""
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    A = rng.standard_normal((m, n))
    lower = rng.uniform(-2.0, -0.5, size=n)
    upper = rng.uniform(0.5, 2.0, size=n)
    x0 = rng.uniform(lower, upper)
    margin = rng.uniform(-0.4, 1.2, size=m)
    senses = [("<=" if rng.random() < 0.5 else ">=") for _ in range(m)]
    rhs = np.empty(m)
    for i, s in enumerate(senses):
        rhs[i] = A[i] @ x0 + (margin[i] if s == "<=" else -margin[i])
    c = rng.standard_normal(n)
    return c, A, senses, rhs, lower, upper


def naive_loo_criterion(data: Dataset, C: float) -> float:
    """Leave-one-out squared error, recomputed with explicit double loops.

    Follows the same floating-point formula order as the fast path (squared
    distances, max-shifted exponentials, np.sum reductions) so the results
    must agree bit for bit.
    """
    n, d = data.n, data.d
    h = C * float(n) ** (-1.0 / (d + 4))
    X, Y = data.xs, data.ys
    residuals = np.empty(n)
    for i in range(n):
        sq = np.empty(n - 1)
        ys = np.empty(n - 1)
        pos = 0
        for j in range(n):
            if j == i:
                continue
            sq[pos] = np.sum((X[i] - X[j]) ** 2)
            ys[pos] = Y[j]
            pos += 1
        logw = -0.5 * sq / (h * h)
        m = np.max(logw)
        if m < -745.0:
            pred = float(np.mean(ys))
        else:
            w = np.exp(logw - m)
            pred = float(np.sum(ys * w) / np.sum(w))
        residuals[i] = Y[i] - pred
    return float(np.sum(residuals * residuals))


def random_max_affine(rng, d, n_pieces=None, cap=4.0):
    """A random capped max-affine model for duality experiments."""
    if n_pieces is None:
        n_pieces = int(rng.integers(1, 5))
    pieces = []
    for _ in range(n_pieces):
        xi = np.clip(rng.standard_normal(d) * 1.5, -cap, cap)
        anchor = rng.standard_normal(d)
        g = float(rng.standard_normal())
        pieces.append(AffinePiece(g=g, xi=xi, anchor=anchor))
    return MaxAffineModel(d=d, pieces=pieces, grad_cap=cap)


def random_dataset(rng, n, d, sigma=0.3):
    X = rng.standard_normal((n, d))
    Y = np.abs(X).sum(axis=1) + sigma * rng.standard_normal(n)
    return Dataset(xs=X, ys=Y, tag="test:random")
