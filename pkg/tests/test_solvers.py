import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from iscrc import (CappedSimplex, DataError, DegenerateGeometryError, DimensionError, InfeasibleError,
                   LassoProblem, SolverError, constrained_ridge_solve, lasso_solve, project_capped_simplex,
                   qp_capped_simplex_blocks)
from iscrc.solvers import lasso_objective, lasso_solve_many


def lasso_kkt_violation(A, y, b, lam):
    g = 2.0 * A.T @ (A @ b - y)
    viol = np.where(b == 0.0, np.maximum(np.abs(g) - lam, 0.0), np.abs(g + np.sign(b) * lam))
    return float(viol.max())


class TestOracles:
    """The reference solvers themselves, on hand-checkable cases."""

    def test_brute_force_lasso_scalar(self):
        b, _ = oracles.lasso_brute_force(np.array([[1.0]]), np.array([1.0]), 0.5)
        assert b[0] == pytest.approx(0.75)

    def test_grid_projection(self):
        assert np.allclose(oracles.grid_projection_3d(np.array([0.4, 0.4, 0.4]), 1.0), 1 / 3, atol=1e-3)

    def test_grid_qp_identity(self):
        val, z = oracles.grid_qp_2x2(np.eye(4))
        assert val == pytest.approx(1.0)
        assert np.allclose(z, 0.5)

    def test_kkt_oracle_scalar(self):
        a, beta, _ = oracles.kkt_ridge(np.ones((1, 1)), np.ones((1, 1)), 0.1, 0.1)
        assert a[0] == pytest.approx(1.0)
        assert beta[0] == pytest.approx(1 / 1.1)


class TestLasso:
    def test_unpenalized_square_system(self, rng):
        A = rng.standard_normal((6, 6)) + 3 * np.eye(6)
        y = rng.standard_normal(6)
        res = lasso_solve(LassoProblem(A, y, 0.0), tol=1e-12, max_iters=100000)
        assert res.converged
        assert np.allclose(res.coef, np.linalg.solve(A, y), atol=1e-8)

    def test_scalar_soft_threshold(self):
        res = lasso_solve(LassoProblem(np.array([[1.0]]), np.array([1.0]), 0.5))
        assert res.coef[0] == pytest.approx(0.75, abs=1e-12)

    def test_zero_target(self, rng):
        res = lasso_solve(LassoProblem(rng.standard_normal((5, 8)), np.zeros(5), 0.1))
        assert not res.coef.any()

    def test_large_penalty_gives_zero(self, rng):
        A = rng.standard_normal((5, 4))
        y = rng.standard_normal(5)
        lam = 2.0 * np.abs(A.T @ y).max()
        assert not lasso_solve(LassoProblem(A, y, lam)).coef.any()

    def test_rejects_bad_input(self, rng):
        with pytest.raises(DataError):
            LassoProblem(np.array([[np.nan]]), np.array([1.0]), 0.1)
        with pytest.raises(DimensionError):
            LassoProblem(np.ones((3, 2)), np.ones(4), 0.1)
        with pytest.raises(Exception):
            LassoProblem(np.ones((3, 2)), np.ones(3), -1.0)

    def test_non_convergence_is_flagged_not_raised(self, rng):
        A = rng.standard_normal((30, 60))
        y = rng.standard_normal(30)
        res = lasso_solve(LassoProblem(A, y, 1e-6), tol=1e-14, max_iters=1)
        assert not res.converged
        assert np.all(np.isfinite(res.coef))

    def test_deterministic(self, rng):
        p = LassoProblem(rng.standard_normal((10, 15)), rng.standard_normal(10), 0.01)
        assert np.array_equal(lasso_solve(p).coef, lasso_solve(p).coef)

    def test_batch_matches_single(self, rng):
        A = rng.standard_normal((12, 9))
        Y = rng.standard_normal((12, 4))
        B, conv = lasso_solve_many(A, Y, 0.05)
        assert conv.all()
        for t in range(4):
            assert np.array_equal(B[:, t], lasso_solve(LassoProblem(A, Y[:, t], 0.05)).coef)

    @settings(max_examples=80, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), m=st.integers(1, 12), n=st.integers(1, 12),
           lam=st.sampled_from([0.0, 1e-4, 1e-3, 0.1, 1.0]))
    def test_kkt_conditions(self, seed, m, n, lam):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((m, n))
        y = rng.standard_normal(m)
        if lam == 0.0 and m < n:
            lam = 1e-3  # unpenalized underdetermined problems have no unique answer to check
        res = lasso_solve(LassoProblem(A, y, lam), tol=1e-8, max_iters=20000)
        assert res.converged
        assert lasso_kkt_violation(A, y, res.coef, lam) <= 1e-6

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), n=st.integers(1, 4), lam=st.floats(1e-3, 2.0))
    def test_matches_brute_force(self, seed, n, lam):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((rng.integers(1, 7), n))
        y = rng.standard_normal(A.shape[0])
        _, best = oracles.lasso_brute_force(A, y, lam)
        got = lasso_objective(A, y, lasso_solve(LassoProblem(A, y, lam)).coef, lam)
        assert got <= best + 1e-6


class TestConstrainedRidge:
    def test_single_query_sample(self, rng):
        a, _ = constrained_ridge_solve(rng.standard_normal((8, 1)), rng.standard_normal((8, 5)), 1e-3, 1e-3)
        assert a.shape == (1,)
        assert a[0] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("lam", [1e-3, 0.1, 2.0])
    def test_shared_unit_column(self, lam):
        y = np.array([[0.6], [0.8]])
        a, beta = constrained_ridge_solve(y, y, lam, lam)
        assert a[0] == pytest.approx(1.0, abs=1e-12)
        assert beta[0] == pytest.approx(1.0 / (1.0 + lam), abs=1e-12)

    def test_matches_kkt_oracle(self, rng):
        Y, D = rng.standard_normal((5, 2)), rng.standard_normal((5, 3))
        a, beta = constrained_ridge_solve(Y, D, 1e-3, 1e-3)
        ao, bo, _ = oracles.kkt_ridge(Y, D, 1e-3, 1e-3)
        assert np.allclose(a, ao, atol=1e-8)
        assert np.allclose(beta, bo, atol=1e-8)

    def test_requires_positive_penalties(self, rng):
        with pytest.raises(Exception):
            constrained_ridge_solve(rng.standard_normal((4, 2)), rng.standard_normal((4, 2)), 0.0, 1e-3)

    def test_degenerate_normalization(self):
        # a huge query-side penalty pushes d^T z0 below the normalization threshold
        Y = np.ones((1, 1))
        with pytest.raises(DegenerateGeometryError):
            constrained_ridge_solve(Y, np.ones((1, 1)), 1e300, 1e-3)


class TestProjection:
    def test_feasible_point_unchanged(self):
        assert np.allclose(project_capped_simplex([0.5, 0.5]), [0.5, 0.5])

    def test_clips_to_vertex(self):
        assert np.allclose(project_capped_simplex([2.0, 0.0]), [1.0, 0.0], atol=1e-12)
        assert np.allclose(oracles.grid_projection_3d(np.array([2.0, 0.0, 0.0]), 1.0), [1, 0, 0], atol=1e-3)

    def test_uniform_shift(self):
        assert np.allclose(project_capped_simplex([0.4, 0.4, 0.4]), 1 / 3, atol=1e-12)

    def test_cap_binds(self):
        x = project_capped_simplex([5.0, 0.0, 0.0], CappedSimplex(3, tau=0.4))
        assert np.allclose(x, [0.4, 0.3, 0.3], atol=1e-12)

    def test_tight_cap_is_uniform(self):
        assert np.allclose(project_capped_simplex([3.0, -1.0, 7.0, 0.0], CappedSimplex(4, tau=0.25)), 0.25)

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            CappedSimplex(3, tau=0.3)
        with pytest.raises(InfeasibleError):
            CappedSimplex(2, tau=0.0)

    def test_rejects_bad_input(self):
        with pytest.raises(DimensionError):
            project_capped_simplex([1.0, 2.0], CappedSimplex(3))
        with pytest.raises(DataError):
            project_capped_simplex([np.inf, 0.0])

    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), n=st.integers(1, 30), tau=st.floats(0.05, 3.0),
           scale=st.sampled_from([1e-3, 1.0, 1e3]))
    def test_kkt_and_idempotence(self, seed, n, tau, scale):
        if n * tau < 1.0:
            tau = 1.0 / n
        rng = np.random.default_rng(seed)
        v = scale * rng.standard_normal(n)
        c = CappedSimplex(n, tau)
        x = project_capped_simplex(v, c)
        assert abs(x.sum() - 1.0) <= 1e-10
        assert c.contains(x, 1e-12)
        assert np.allclose(project_capped_simplex(x, c), x, atol=1e-12)
        # optimality: v - x = mu on free coordinates, >= mu at 0, <= mu at tau
        free = (x > 1e-12) & (x < tau - 1e-12)
        if free.any():
            mu = np.mean((v - x)[free])
            tol = 1e-9 * max(1.0, np.abs(v).max())
            assert np.allclose((v - x)[free], mu, atol=tol)
            assert np.all(v[x <= 1e-12] <= mu + tol)
            assert np.all(v[x >= tau - 1e-12] - tau >= mu - tol)

    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), n=st.integers(1, 20), tau=st.floats(0.05, 2.0))
    def test_nonexpansive(self, seed, n, tau):
        tau = max(tau, 1.0 / n)
        rng = np.random.default_rng(seed)
        u, v = rng.standard_normal(n) * 3, rng.standard_normal(n) * 3
        c = CappedSimplex(n, tau)
        pu, pv = project_capped_simplex(u, c), project_capped_simplex(v, c)
        assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-12


class TestQP:
    def test_identity(self):
        s = qp_capped_simplex_blocks(np.eye(4), CappedSimplex(2), CappedSimplex(2))
        assert np.allclose(s.a, 0.5, atol=1e-6)
        assert np.allclose(s.beta, 0.5, atol=1e-6)
        assert s.objective == pytest.approx(1.0, abs=1e-8)

    def test_single_coordinate_blocks(self, rng):
        M = rng.standard_normal((2, 2))
        s = qp_capped_simplex_blocks(M @ M.T, CappedSimplex(1), CappedSimplex(1))
        assert s.a.tolist() == [1.0] and s.beta.tolist() == [1.0]

    def test_matches_grid(self, rng):
        for _ in range(5):
            M = rng.standard_normal((4, 4))
            H = M.T @ M
            s = qp_capped_simplex_blocks(H, CappedSimplex(2), CappedSimplex(2))
            best, _ = oracles.grid_qp_2x2(H)
            assert abs(s.objective - best) <= 1e-3

    def test_asymmetric_rejected(self):
        H = np.eye(4)
        H[0, 1] = 0.1
        with pytest.raises(SolverError, match="symmetric"):
            qp_capped_simplex_blocks(H, CappedSimplex(2), CappedSimplex(2))

    def test_negative_curvature_detected(self, rng):
        M = rng.standard_normal((6, 6))
        H = -(M @ M.T)
        with pytest.raises(SolverError):
            qp_capped_simplex_blocks(H, CappedSimplex(3), CappedSimplex(3))

    def test_shape_checked(self):
        with pytest.raises(DimensionError):
            qp_capped_simplex_blocks(np.eye(3), CappedSimplex(2), CappedSimplex(2))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), n_a=st.integers(1, 8), n_b=st.integers(1, 12),
           tau=st.sampled_from([1.0, 0.6, 0.35]))
    def test_feasible_and_monotone(self, seed, n_a, n_b, tau):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((5, n_a + n_b))
        H = M.T @ M
        ca = CappedSimplex(n_a, max(tau, 1.0 / n_a))
        cb = CappedSimplex(n_b, max(tau, 1.0 / n_b))
        s = qp_capped_simplex_blocks(H, ca, cb)
        assert ca.contains(s.a, 1e-10) and cb.contains(s.beta, 1e-10)
        trace = np.array(s.trace)
        assert np.all(np.diff(trace) <= 1e-12 * np.maximum(1.0, np.abs(trace[:-1])))
