import numpy as np
import pytest

from convexreg.exceptions import InvalidArgumentError
from convexreg.lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram,
                          SolverOptions, certify, lp_to_text, solve_lp,
                          validate_infeasibility_certificate)
from oracles import enumerate_vertices_objective, random_box_lp


def simple_lp():
    # minimize x subject to x >= 1
    return LinearProgram(objective=[1.0], rows=[0], cols=[0], vals=[1.0],
                         senses=[">="], rhs=[1.0], lower=[-np.inf],
                         upper=[np.inf])


def lp_from_dense(c, A, senses, rhs, lower, upper):
    A = np.asarray(A, dtype=np.float64)
    rows, cols = np.nonzero(np.ones_like(A, dtype=bool))
    return LinearProgram(objective=c, rows=rows, cols=cols,
                         vals=A[rows, cols], senses=senses, rhs=rhs,
                         lower=lower, upper=upper)


class TestConstruction:
    def test_duplicate_triplets_summed(self):
        lp = LinearProgram(objective=[1.0], rows=[0, 0], cols=[0, 0],
                           vals=[0.5, 0.5], senses=[">="], rhs=[1.0],
                           lower=[-np.inf], upper=[np.inf])
        assert lp.matrix.nnz == 1
        assert lp.matrix[0, 0] == 1.0

    def test_bad_indices(self):
        with pytest.raises(InvalidArgumentError):
            LinearProgram(objective=[1.0], rows=[2], cols=[0], vals=[1.0],
                          senses=[">="], rhs=[1.0], lower=[0.0], upper=[1.0])

    def test_bad_bounds(self):
        with pytest.raises(InvalidArgumentError):
            LinearProgram(objective=[1.0], rows=[], cols=[], vals=[],
                          senses=[], rhs=[], lower=[2.0], upper=[1.0])

    def test_bad_sense(self):
        with pytest.raises(InvalidArgumentError):
            LinearProgram(objective=[1.0], rows=[0], cols=[0], vals=[1.0],
                          senses=["<"], rhs=[1.0], lower=[0.0], upper=[1.0])


class TestSolve:
    def test_minimal(self):
        sol = solve_lp(simple_lp())
        assert sol.status == OPTIMAL
        assert sol.primal[0] == pytest.approx(1.0, abs=1e-10)
        assert sol.objective_value == pytest.approx(1.0, abs=1e-10)

    def test_triangle_face(self):
        # minimize -x - y subject to x + y <= 1, x, y in [0, 1]
        lp = lp_from_dense([-1.0, -1.0], [[1.0, 1.0]], ["<="], [1.0],
                           [0.0, 0.0], [1.0, 1.0])
        sol = solve_lp(lp)
        assert sol.status == OPTIMAL
        assert sol.objective_value == pytest.approx(-1.0, abs=1e-10)
        assert sol.primal.sum() == pytest.approx(1.0, abs=1e-10)

    def test_equality_row(self):
        lp = lp_from_dense([1.0, 2.0], [[1.0, -1.0], [1.0, 1.0]],
                           ["=", ">="], [0.2, 1.0],
                           [0.0, 0.0], [np.inf, np.inf])
        sol = solve_lp(lp)
        assert sol.status == OPTIMAL
        assert sol.primal == pytest.approx([0.6, 0.4], abs=1e-9)
        # stationarity with the recovered duals
        rc = lp.objective - lp.matrix.T @ sol.dual
        assert np.abs(rc).max() < 1e-8

    def test_unbounded(self):
        lp = LinearProgram(objective=[-1.0], rows=[], cols=[], vals=[],
                           senses=[], rhs=[], lower=[0.0], upper=[np.inf])
        assert solve_lp(lp).status == UNBOUNDED

    def test_infeasible_with_certificate(self):
        # x >= 1 and x <= 0
        lp = LinearProgram(objective=[1.0], rows=[0], cols=[0], vals=[1.0],
                           senses=[">="], rhs=[1.0], lower=[-5.0],
                           upper=[0.0])
        sol = solve_lp(lp)
        assert sol.status == INFEASIBLE
        assert sol.infeasibility_certificate is not None
        assert validate_infeasibility_certificate(
            lp, sol.infeasibility_certificate)

    def test_determinism_bitwise(self):
        rng = np.random.default_rng(11)
        for _ in range(6):
            c, A, senses, rhs, lower, upper = random_box_lp(rng)
            lp1 = lp_from_dense(c, A, senses, rhs, lower, upper)
            lp2 = lp_from_dense(c, A, senses, rhs, lower, upper)
            for algorithm in ("simplex", "interior-point"):
                opts = SolverOptions(algorithm=algorithm)
                s1 = solve_lp(lp1, opts)
                s2 = solve_lp(lp2, opts)
                assert s1.status == s2.status
                assert repr(s1.objective_value) == repr(s2.objective_value)
                if s1.primal is not None:
                    assert np.array_equal(s1.primal, s2.primal)

    def test_objective_scaling_invariance(self):
        lp = lp_from_dense([-1.0, -2.0], [[1.0, 1.0], [2.0, 1.0]],
                           ["<=", "<="], [1.0, 1.5], [0.0, 0.0], [5.0, 5.0])
        base = solve_lp(lp)
        lp_scaled = lp_from_dense([-3.0, -6.0], [[1.0, 1.0], [2.0, 1.0]],
                                  ["<=", "<="], [1.0, 1.5],
                                  [0.0, 0.0], [5.0, 5.0])
        scaled = solve_lp(lp_scaled)
        assert scaled.objective_value == pytest.approx(
            3.0 * base.objective_value, rel=1e-12)
        assert scaled.primal == pytest.approx(base.primal, abs=1e-9)

    def test_iteration_limit_status(self):
        rng = np.random.default_rng(21)
        A = rng.standard_normal((10, 6))
        lp = lp_from_dense(rng.standard_normal(6), A, [">="] * 10,
                           A @ rng.uniform(-1, 1, size=6) - 0.5,
                           [-2.0] * 6, [2.0] * 6)
        sol = solve_lp(lp, SolverOptions(algorithm="simplex",
                                         max_iterations=1))
        assert sol.status == "iteration-limit"

    def test_weak_duality_gap(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            c, A, senses, rhs, lower, upper = random_box_lp(rng)
            sol = solve_lp(lp_from_dense(c, A, senses, rhs, lower, upper))
            if sol.status == OPTIMAL:
                assert sol.residuals.complementarity_gap <= 1e-7


class TestCertify:
    def test_hand_built_optimum(self):
        lp = simple_lp()
        sol = solve_lp(lp)
        report = certify(lp, sol)
        assert report.primal_infeasibility <= 1e-12
        assert report.dual_infeasibility <= 1e-12
        assert report.complementarity_gap <= 1e-12

    def test_perturbed_primal_detected(self):
        # minimize -x s.t. x <= 1: optimum x=1 binds; pushing past it by
        # 1e-3 must show up as primal infeasibility >= 1e-3
        lp = lp_from_dense([-1.0], [[1.0]], ["<="], [1.0], [0.0], [np.inf])
        sol = solve_lp(lp)
        from dataclasses import replace
        bad = replace(sol, primal=sol.primal + 1e-3)
        report = certify(lp, bad)
        assert report.primal_infeasibility >= 1e-3 - 1e-12

    def test_dimension_mismatch(self):
        lp = simple_lp()
        sol = solve_lp(lp)
        from dataclasses import replace
        with pytest.raises(InvalidArgumentError):
            certify(lp, replace(sol, primal=np.zeros(3)))


class TestRandomSuiteAgainstVertexOracle:
    def test_hundred_random_lps(self):
        rng = np.random.default_rng(123)
        solved = 0
        infeasible = 0
        for _ in range(100):
            c, A, senses, rhs, lower, upper = random_box_lp(rng)
            lp = lp_from_dense(c, A, senses, rhs, lower, upper)
            sol = solve_lp(lp)
            best, _ = enumerate_vertices_objective(c, A, senses, rhs,
                                                   lower, upper)
            if best is None:
                assert sol.status == INFEASIBLE
                infeasible += 1
            else:
                assert sol.status == OPTIMAL
                assert sol.objective_value == pytest.approx(best, abs=1e-7)
                assert sol.residuals.within(1e-8, 1e-7)
                solved += 1
        assert solved >= 50  # generator skews feasible
        assert solved + infeasible == 100


class TestTextExport:
    def test_render(self):
        text = lp_to_text(simple_lp())
        assert "r0 >= 1" in text
        assert "x0" in text
