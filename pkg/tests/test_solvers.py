"""Drift estimators: closed-form baseline and proximal-gradient solvers."""

import numpy as np
import pytest

from oracles import cd_lasso, lasso_objective, random_spd_stats
from sparse_ou import (
    DriftMatrix,
    EstimatorResult,
    InitialLaw,
    NumericalError,
    SolverConfig,
    SuffStats,
    WeightVector,
    compute_suffstats,
    loss,
    result_from_json,
    result_to_json,
    simulate_exact,
    slope_weights,
    solve_lasso,
    solve_mle,
    solve_slope,
)


def _identity_stats(dim, b_hat, n_paths=10):
    return SuffStats(dim, np.eye(dim), np.asarray(b_hat, dtype=float), n_paths, 1.0, 0.01)


class TestMle:
    def test_identity_second_moment(self):
        rng = np.random.default_rng(0)
        b = rng.normal(size=(3, 3))
        result = solve_mle(_identity_stats(3, b))
        assert np.allclose(result.estimate.entries, b, atol=1e-10)
        assert result.converged

    def test_exact_recovery_from_population_stats(self):
        rng = np.random.default_rng(1)
        truth = rng.normal(size=(4, 4))
        stats = random_spd_stats(rng, 4)
        exact = SuffStats(4, stats.c_hat, truth @ stats.c_hat, 10, 1.0, 0.01)
        result = solve_mle(exact)
        assert np.allclose(result.estimate.entries, truth, atol=1e-8)

    def test_normal_equation_residual(self):
        rng = np.random.default_rng(2)
        stats = random_spd_stats(rng, 6)
        result = solve_mle(stats)
        residual = result.estimate.entries @ stats.c_hat - stats.b_hat
        assert np.max(np.abs(residual)) <= 1e-8 * max(np.max(np.abs(stats.b_hat)), 1.0)

    def test_error_shrinks_with_more_paths(self):
        drift = DriftMatrix(2, np.array([[-1.0, 0.5], [0.0, -0.8]]))

        def error_at(n, seed):
            bundle = simulate_exact(drift, InitialLaw(), n, 1.0, 0.01, seed=seed)
            est = solve_mle(compute_suffstats(bundle)).estimate.entries
            return np.linalg.norm(est - drift.entries)

        coarse = np.mean([error_at(500, 100 + r) for r in range(8)])
        fine = np.mean([error_at(8000, 200 + r) for r in range(8)])
        ratio = coarse / fine
        assert 2.0 <= ratio <= 8.0  # expect about 4 = sqrt(8000 / 500)

    def test_singular_second_moment_raises(self):
        stats = SuffStats(2, np.zeros((2, 2)), np.eye(2), 1, 1.0, 0.01)
        with pytest.raises(NumericalError):
            solve_mle(stats)

    def test_near_singular_raises(self):
        c = np.diag([1.0, 1e-15])
        stats = SuffStats(2, c, np.eye(2), 1, 1.0, 0.01)
        with pytest.raises(NumericalError):
            solve_mle(stats)


class TestLasso:
    def test_zero_penalty_matches_mle(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            stats = random_spd_stats(rng, 5)
            mle = solve_mle(stats).estimate.entries
            lasso = solve_lasso(stats, 0.0).estimate.entries
            assert np.linalg.norm(lasso - mle) <= 1e-6 * (1.0 + np.linalg.norm(mle))

    def test_huge_penalty_gives_exact_zero(self):
        rng = np.random.default_rng(4)
        stats = random_spd_stats(rng, 4)
        lam = 2.0 * float(np.max(np.abs(stats.b_hat)))
        result = solve_lasso(stats, lam)
        assert np.array_equal(result.estimate.entries, np.zeros((4, 4)))
        assert result.converged

    def test_matches_coordinate_descent(self):
        rng = np.random.default_rng(5)
        for dim in (2, 3, 4):
            stats = random_spd_stats(rng, dim)
            lam = 0.3
            ours = solve_lasso(stats, lam).estimate.entries
            reference = cd_lasso(stats.c_hat, stats.b_hat, lam)
            f_ours = lasso_objective(stats.c_hat, stats.b_hat, lam, ours)
            f_ref = lasso_objective(stats.c_hat, stats.b_hat, lam, reference)
            assert f_ours <= f_ref + 1e-6 * max(1.0, abs(f_ref))
            assert np.allclose(ours, reference, atol=1e-5)

    def test_kkt_conditions(self):
        rng = np.random.default_rng(6)
        stats = random_spd_stats(rng, 5)
        lam = 0.2
        estimate = solve_lasso(stats, lam).estimate.entries
        gradient = estimate @ stats.c_hat - stats.b_hat
        active = np.abs(estimate) > 1e-12
        # Active coordinates: gradient equals -lam * sign; inactive: within lam.
        assert np.all(
            np.abs(gradient[active] + lam * np.sign(estimate[active])) <= 1e-6
        )
        assert np.all(np.abs(gradient[~active]) <= lam + 1e-6)

    def test_objective_history_monotone(self):
        rng = np.random.default_rng(7)
        stats = random_spd_stats(rng, 6)
        result = solve_lasso(stats, 0.1)
        history = np.asarray(result.objective_history)
        assert history.size >= 1
        assert np.all(np.diff(history) <= 1e-12)

    def test_fixed_point_residual_at_solution(self):
        rng = np.random.default_rng(8)
        stats = random_spd_stats(rng, 5)
        config = SolverConfig()
        result = solve_lasso(stats, 0.15, config=config)
        a = result.estimate.entries
        lip = loss(stats, a).lipschitz
        from sparse_ou import prox_l1

        stepped = prox_l1(a - (a @ stats.c_hat - stats.b_hat) / lip, 0.15 / lip)
        gap = np.max(np.abs(stepped - a))
        assert gap <= 10 * config.rel_tol * (1.0 + np.max(np.abs(a)))

    def test_warm_start_converges_faster(self):
        rng = np.random.default_rng(9)
        stats = random_spd_stats(rng, 6)
        cold = solve_lasso(stats, 0.05)
        warm = solve_lasso(stats, 0.05, warm_start=cold.estimate.entries)
        assert warm.iterations <= cold.iterations
        assert np.allclose(warm.estimate.entries, cold.estimate.entries, atol=1e-6)

    def test_support_recovery_on_population_stats(self):
        # Noiseless statistics from a sparse truth: a small penalty keeps the
        # estimate near the truth, and thresholding recovers the support.
        rng = np.random.default_rng(10)
        truth = np.array(
            [
                [-1.0, 0.0, 0.4, 0.0],
                [0.0, -0.7, 0.0, 0.0],
                [0.0, 0.0, -1.2, 0.3],
                [0.2, 0.0, 0.0, -0.9],
            ]
        )
        base = random_spd_stats(rng, 4)
        stats = SuffStats(4, base.c_hat, truth @ base.c_hat, 10, 1.0, 0.01)
        estimate = solve_lasso(stats, 1e-4).estimate.entries
        assert np.max(np.abs(estimate - truth)) <= 0.01
        found = set(zip(*np.nonzero(np.abs(estimate) > 0.05)))
        expected = set(zip(*np.nonzero(truth)))
        assert found == expected

    def test_negative_penalty_rejected(self):
        stats = _identity_stats(2, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            solve_lasso(stats, -0.1)

    def test_bad_warm_start_shape_rejected(self):
        stats = _identity_stats(2, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            solve_lasso(stats, 0.1, warm_start=np.zeros((3, 3)))


class TestSlope:
    def test_zero_penalty_matches_mle(self):
        rng = np.random.default_rng(11)
        stats = random_spd_stats(rng, 4)
        mle = solve_mle(stats).estimate.entries
        estimate = solve_slope(stats, 0.0).estimate.entries
        assert np.linalg.norm(estimate - mle) <= 1e-6 * (1.0 + np.linalg.norm(mle))

    def test_constant_weights_match_lasso(self):
        rng = np.random.default_rng(12)
        stats = random_spd_stats(rng, 3)
        level = 0.8
        lam = 0.25
        flat = WeightVector(np.full(9, level))
        slope = solve_slope(stats, lam, weights=flat).estimate.entries
        lasso = solve_lasso(stats, lam * level).estimate.entries
        assert np.allclose(slope, lasso, atol=1e-7)

    def test_default_weights_are_slope_weights(self):
        rng = np.random.default_rng(13)
        stats = random_spd_stats(rng, 3)
        explicit = solve_slope(stats, 0.2, weights=slope_weights(9)).estimate.entries
        default = solve_slope(stats, 0.2).estimate.entries
        assert np.array_equal(explicit, default)

    def test_perturbation_optimality(self):
        rng = np.random.default_rng(14)
        stats = random_spd_stats(rng, 3)
        lam = 0.3
        w = slope_weights(9)
        result = solve_slope(stats, lam)

        def objective(a):
            value = 0.5 * float(np.einsum("ij,ij->", a @ stats.c_hat, a))
            value -= float(np.einsum("ij,ij->", a, stats.b_hat))
            mags = np.sort(np.abs(a.ravel()))[::-1]
            return value + lam * float(mags @ w.weights)

        best = objective(result.estimate.entries)
        for _ in range(800):
            probe = result.estimate.entries + rng.normal(size=(3, 3)) * 1e-3
            assert objective(probe) >= best - 1e-9

    def test_huge_penalty_gives_zero(self):
        rng = np.random.default_rng(15)
        stats = random_spd_stats(rng, 4)
        lam = 10.0 * float(np.max(np.abs(stats.b_hat)))
        result = solve_slope(stats, lam)
        assert np.array_equal(result.estimate.entries, np.zeros((4, 4)))

    def test_weight_length_must_match(self):
        stats = _identity_stats(2, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            solve_slope(stats, 0.1, weights=slope_weights(3))


class TestConfigAndResult:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(max_iters=0)
        with pytest.raises(ValueError):
            SolverConfig(rel_tol=0.0)
        with pytest.raises(ValueError):
            SolverConfig(step_rule="newton")
        with pytest.raises(ValueError):
            SolverConfig(backtracking_factor=1.5)

    def test_backtracking_rule_agrees(self):
        rng = np.random.default_rng(16)
        stats = random_spd_stats(rng, 4)
        fixed = solve_lasso(stats, 0.1)
        config = SolverConfig(step_rule="backtracking")
        tracked = solve_lasso(stats, 0.1, config=config)
        assert np.allclose(fixed.estimate.entries, tracked.estimate.entries, atol=1e-6)
        assert tracked.converged

    def test_iteration_cap_reported(self):
        rng = np.random.default_rng(17)
        stats = random_spd_stats(rng, 6)
        config = SolverConfig(max_iters=2)
        result = solve_lasso(stats, 1e-6, config=config)
        assert not result.converged
        assert result.iterations == 2

    def test_result_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(18)
        stats = random_spd_stats(rng, 3)
        result = solve_lasso(stats, 0.2)
        target = tmp_path / "result.json"
        result_to_json(result, target)
        parsed = result_from_json(target)
        assert isinstance(parsed, EstimatorResult)
        assert np.array_equal(parsed.estimate.entries, result.estimate.entries)
        assert parsed.penalty_kind == result.penalty_kind
        assert parsed.lambda_used == result.lambda_used
        assert parsed.iterations == result.iterations
        assert parsed.converged == result.converged
        assert np.array_equal(
            np.asarray(parsed.objective_history), np.asarray(result.objective_history)
        )
