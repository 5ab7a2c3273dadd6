"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; the whole module is also part of the default suite.
"""

import math
import time

import numpy as np
import pytest

from convexreg.baselines import (BANDWIDTH_GRID, loo_criterion,
                                 select_bandwidth)
from convexreg.bench import ExperimentSpec, RealDataSpec, emit, run_benchmark, \
    run_real_data
from convexreg.data import CsvSchema, write_market_like_csv
from convexreg.fitting import FitConfig, fit_drcr, worst_case_loss_oracle
from convexreg.lp import INFEASIBLE, OPTIMAL, solve_lp
from convexreg.model import (Dataset, dual_objective, gradient_sup_norm,
                             predict_many)
from oracles import (enumerate_vertices_objective, naive_loo_criterion,
                     random_box_lp, random_dataset, random_max_affine)
from test_lp import lp_from_dense


def report(num, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:>2}: {tag} {detail}")
    assert ok, f"criterion {num}: {detail}"


def fixed(delta, **kw):
    return FitConfig(schedule="fixed", delta=delta, **kw)


def test_criterion_1_strong_duality():
    t0 = time.time()
    rng = np.random.default_rng(101)
    worst_final_rel = 0.0
    for _ in range(25):
        n = int(rng.integers(1, 6))
        d = int(rng.integers(1, 3))
        model = random_max_affine(rng, d)
        data = random_dataset(rng, n, d)
        delta = float(rng.uniform(0.05, 1.0))
        dual = dual_objective(model, data, delta)
        gaps = []
        for res in (8, 16, 32):   # 4x refinement from the base grid
            val = worst_case_loss_oracle(model, data, delta,
                                         moves_per_point=res)
            assert val <= dual + 1e-6
            gaps.append(dual - val)
        for a, b in zip(gaps, gaps[1:]):
            assert b <= a + 1e-12
        assert gaps[-1] <= 0.05 * dual + 1e-6
        worst_final_rel = max(worst_final_rel, gaps[-1] / (dual + 1e-12))
    elapsed = time.time() - t0
    report(1, elapsed < 10.0,
           f"worst relative gap {worst_final_rel:.2e}, {elapsed:.1f}s < 10s")


def test_criterion_2_lp_solver_vs_vertex_oracle():
    t0 = time.time()
    rng = np.random.default_rng(202)
    solved = 0
    for _ in range(100):
        c, A, senses, rhs, lower, upper = random_box_lp(rng)
        lp = lp_from_dense(c, A, senses, rhs, lower, upper)
        sol = solve_lp(lp)
        best, _ = enumerate_vertices_objective(c, A, senses, rhs, lower,
                                               upper)
        if best is None:
            assert sol.status == INFEASIBLE
        else:
            assert sol.status == OPTIMAL
            assert abs(sol.objective_value - best) <= 1e-7
            assert sol.residuals.within(1e-8, 1e-7)
            solved += 1
    elapsed = time.time() - t0
    report(2, elapsed < 5.0,
           f"{solved} optimal LPs matched the oracle, {elapsed:.1f}s < 5s")


def test_criterion_3_interpolation_identity():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(30):
        n = int(rng.integers(4, 41))
        d = int(rng.integers(1, 4))
        data = random_dataset(rng, n, d)
        model = fit_drcr(data, fixed(float(rng.uniform(0, 0.6))))
        fitted = predict_many(model, data.xs)
        ghat = np.array([p.g for p in model.pieces])
        worst = max(worst, float(np.abs(fitted - ghat).max()))
    report(3, worst <= 1e-9, f"max |predict - g_hat| = {worst:.2e} <= 1e-9")


def test_criterion_4_median_property():
    rng = np.random.default_rng(404)
    ok = True
    for _ in range(50):
        n = int(rng.integers(4, 35))
        d = int(rng.integers(1, 4))
        data = random_dataset(rng, n, d)
        model = fit_drcr(data, fixed(float(rng.uniform(0, 1.0))))
        fitted = predict_many(model, data.xs)
        above = int(np.sum(data.ys >= fitted - 1e-7))
        below = int(np.sum(data.ys <= fitted + 1e-7))
        ok = ok and above >= math.ceil(n / 2) and below >= math.ceil(n / 2)
    report(4, ok, "both residual sign counts >= ceil(n/2) on 50 fits")


def test_criterion_5_penalty_monotonicity():
    rng = np.random.default_rng(505)
    ok = True
    for _ in range(10):
        n = int(rng.integers(10, 30))
        data = random_dataset(rng, n, int(rng.integers(1, 4)))
        norms = [gradient_sup_norm(fit_drcr(data, fixed(dl)))
                 for dl in (0.0, 0.05, 0.5, 5.0)]
        for a, b in zip(norms, norms[1:]):
            ok = ok and (a >= b - 1e-7)
    report(5, ok, "gradient sup-norm non-increasing over deltas {0,.05,.5,5}")


def test_criterion_6_row_generation_equivalence():
    rng = np.random.default_rng(606)
    sparse_hits = 0
    worst_rel = 0.0
    for _ in range(20):
        n = int(rng.integers(25, 61))
        d = int(rng.integers(1, 4))
        data = random_dataset(rng, n, d)
        delta = float(rng.uniform(0.01, 0.5))
        full = fit_drcr(data, fixed(delta, row_generation=False))
        lazy = fit_drcr(data, fixed(delta, row_generation=True))
        a, b = full.fit_meta.objective, lazy.fit_meta.objective
        rel = abs(a - b) / (1 + abs(a))
        worst_rel = max(worst_rel, rel)
        assert rel <= 1e-7
        frac = lazy.fit_meta.extra["rows_used"] \
            / lazy.fit_meta.extra["rows_total"]
        if frac < 0.40:
            sparse_hits += 1
    report(6, sparse_hits >= 10,
           f"objectives agree (worst rel {worst_rel:.1e}); "
           f"{sparse_hits}/20 instances touched < 40% of rows")


def test_criterion_7_noiseless_recovery():
    rng = np.random.default_rng(707)
    # convex data whose interpolant stays inside the default cap log(20)
    xs = np.sort(rng.uniform(-1.0, 1.0, size=20))[:, None]
    data = Dataset(xs=xs, ys=xs[:, 0] ** 2)   # slopes within [-2, 2]
    model = fit_drcr(data, fixed(0.0))
    train_l1 = float(np.mean(np.abs(predict_many(model, xs) - data.ys)))
    report(7, train_l1 <= 1e-8, f"training l1 = {train_l1:.2e} <= 1e-8")


SPEC8 = ExperimentSpec(methods=("drcr", "lse(0.8)"), d=5, n_list=(50, 200),
                       covariate_dist="gaussian", noise_sigma=0.2,
                       replications=20, base_seed=2026,
                       schedule="experimental")


@pytest.fixture(scope="module")
def figure1_table():
    t0 = time.time()
    table = run_benchmark(SPEC8)
    return table, time.time() - t0


def test_criterion_8_figure1_trend(figure1_table):
    table, elapsed = figure1_table
    drcr_50 = table.cell("drcr", 50, "gaussian").mean_l1
    drcr_200 = table.cell("drcr", 200, "gaussian").mean_l1
    lse_200 = table.cell("lse(0.8)", 200, "gaussian").mean_l1
    ok = (drcr_200 < drcr_50) and (drcr_200 <= lse_200) \
        and table.total_failures == 0 and elapsed < 900
    report(8, ok,
           f"drcr l1: {drcr_50:.4f}@50 -> {drcr_200:.4f}@200; "
           f"lse(0.8)@200 = {lse_200:.4f}; {elapsed:.0f}s < 900s")


def test_criterion_9_kernel_cv_exactness():
    rng = np.random.default_rng(909)
    ok = True
    for n in (7, 18, 30):
        data = random_dataset(rng, n, int(rng.integers(1, 3)))
        vals = {}
        for C in BANDWIDTH_GRID:
            fast = loo_criterion(data, C)
            naive = naive_loo_criterion(data, C)
            ok = ok and (fast == naive)
            vals[C] = fast
        _, C_sel = select_bandwidth(data)
        ok = ok and vals[C_sel] == min(vals.values())
    report(9, ok, "fast LOO == double-loop oracle bitwise at every grid C")


def test_criterion_10_real_data_pipeline(tmp_path):
    path = tmp_path / "market.csv"
    write_market_like_csv(path, n_rows=600, seed=20260808)
    schema = CsvSchema(covariates=("so2", "nox", "co2", "noxrate"),
                       response="heat")
    spec = RealDataSpec(methods=("drcr", "lse(10)", "linear"),
                        train_rows=400, replications=10, base_seed=7)
    table = run_real_data(path, schema, spec)
    drcr_test = table.cell("drcr", 200, "test").mean_l1
    lr_test = table.cell("linear", 200, "test").mean_l1
    ok = drcr_test <= lr_test and table.total_failures == 0
    report(10, ok,
           f"test l1: drcr {drcr_test:.4f} <= linear {lr_test:.4f} "
           f"(10 reps, 400/200 splits)")


def test_criterion_11_determinism(figure1_table, tmp_path):
    table_first, _ = figure1_table
    files_a = emit(table_first, tmp_path / "a")
    table_second = run_benchmark(SPEC8)
    files_b = emit(table_second, tmp_path / "b")
    identical = all(a.read_bytes() == b.read_bytes()
                    for a, b in zip(files_a, files_b))
    report(11, identical,
           f"{len(files_a)} emitted files byte-identical across two runs")
