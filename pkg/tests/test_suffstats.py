"""Sufficient statistics, the quadratic loss, and its derivatives."""

import json

import numpy as np
import pytest

from sparse_ou import (
    ExperimentPlan,
    DriftMatrix,
    InitialLaw,
    PathBundle,
    SuffStats,
    compute_c_infty,
    compute_suffstats,
    loss,
    martingale_term,
    simulate_euler,
    simulate_exact,
    stats_from_json,
    stats_to_json,
)


def _bundle_from_array(values, step):
    values = np.asarray(values, dtype=float)
    n, m, d = values.shape
    return PathBundle(
        n_paths=n,
        dim=d,
        terminal=(m - 1) * step,
        step=step,
        grid_len=m,
        seed=0,
        values=values,
    )


class TestComputation:
    def test_hand_summed_single_path(self):
        # One scalar path 0 -> 1 -> 2 on step 0.5:
        # c = 0.5 * (0^2 + 1^2) = 0.5, b = (1 * 0 + 1 * 1) = 1.
        bundle = _bundle_from_array([[[0.0], [1.0], [2.0]]], step=0.5)
        stats = compute_suffstats(bundle)
        assert stats.c_hat[0, 0] == pytest.approx(0.5, abs=1e-15)
        assert stats.b_hat[0, 0] == pytest.approx(1.0, abs=1e-15)
        assert stats.n_paths == 1

    def test_hand_summed_two_dimensional(self):
        values = np.array([[[1.0, 0.0], [0.0, 2.0]]])
        bundle = _bundle_from_array(values, step=1.0)
        stats = compute_suffstats(bundle)
        # Left point x = (1, 0): c = 1 * outer(x, x).
        assert np.allclose(stats.c_hat, [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)
        # Increment (-1, 2): b = outer(increment, x).
        assert np.allclose(stats.b_hat, [[-1.0, 0.0], [2.0, 0.0]], atol=1e-15)

    def test_zero_paths_give_zero_stats(self):
        bundle = _bundle_from_array(np.zeros((4, 11, 2)), step=0.1)
        stats = compute_suffstats(bundle)
        assert np.array_equal(stats.c_hat, np.zeros((2, 2)))
        assert np.array_equal(stats.b_hat, np.zeros((2, 2)))

    def test_averaging_over_paths(self):
        values = np.zeros((2, 2, 1))
        values[0] = [[1.0], [1.0]]
        values[1] = [[3.0], [3.0]]
        bundle = _bundle_from_array(values, step=1.0)
        stats = compute_suffstats(bundle)
        assert stats.c_hat[0, 0] == pytest.approx((1.0 + 9.0) / 2.0)
        assert stats.b_hat[0, 0] == pytest.approx(0.0)

    def test_duplicating_paths_preserves_stats(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(3, 21, 2))
        doubled = np.concatenate([values, values], axis=0)
        s1 = compute_suffstats(_bundle_from_array(values, 0.05))
        s2 = compute_suffstats(_bundle_from_array(doubled, 0.05))
        assert np.allclose(s1.c_hat, s2.c_hat, atol=1e-12)
        assert np.allclose(s1.b_hat, s2.b_hat, atol=1e-12)

    def test_c_hat_symmetric_psd(self):
        rng = np.random.default_rng(1)
        bundle = _bundle_from_array(rng.normal(size=(10, 51, 3)), 0.02)
        stats = compute_suffstats(bundle)
        assert np.array_equal(stats.c_hat, stats.c_hat.T)
        assert np.min(np.linalg.eigvalsh(stats.c_hat)) >= -1e-12


class TestLoss:
    def test_quadratic_identity_against_direct_sum(self):
        rng = np.random.default_rng(2)
        values = rng.normal(size=(6, 26, 3)) * 0.7
        bundle = _bundle_from_array(values, 0.04)
        stats = compute_suffstats(bundle)
        a = rng.normal(size=(3, 3))
        report = loss(stats, a)
        # Direct per-path evaluation of the continuous-observation likelihood
        # contrast: 0.5 int ||A x||^2 dt - int (A x)^T dx, averaged.
        total = 0.0
        for i in range(6):
            left = values[i, :-1, :]
            inc = values[i, 1:, :] - left
            ax = left @ a.T
            total += 0.5 * 0.04 * np.sum(ax * ax) - np.sum(ax * inc)
        assert report.value == pytest.approx(total / 6.0, abs=1e-10)

    def test_loss_at_zero(self):
        rng = np.random.default_rng(3)
        stats = compute_suffstats(_bundle_from_array(rng.normal(size=(4, 11, 2)), 0.1))
        report = loss(stats, np.zeros((2, 2)))
        assert report.value == 0.0
        assert np.allclose(report.gradient, -stats.b_hat, atol=1e-15)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            values = rng.normal(size=(5, 11, 3))
            stats = compute_suffstats(_bundle_from_array(values, 0.1))
            a = rng.normal(size=(3, 3))
            report = loss(stats, a)
            h = 1e-6
            for i in range(3):
                for j in range(3):
                    probe = np.zeros((3, 3))
                    probe[i, j] = h
                    up = loss(stats, a + probe).value
                    down = loss(stats, a - probe).value
                    fd = (up - down) / (2 * h)
                    assert fd == pytest.approx(report.gradient[i, j], abs=1e-6)

    def test_lipschitz_matches_eigvalsh(self):
        rng = np.random.default_rng(5)
        basis, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        c_hat = basis @ np.diag([4.0, 2.0, 1.0, 0.5, 0.25, 0.1]) @ basis.T
        stats = SuffStats(6, 0.5 * (c_hat + c_hat.T), np.zeros((6, 6)), 10, 1.0, 0.01)
        top = float(np.max(np.linalg.eigvalsh(stats.c_hat)))
        assert stats.curvature_bound == pytest.approx(top, rel=1e-7)
        assert loss(stats, np.zeros((6, 6))).lipschitz == pytest.approx(top, rel=1e-7)

    def test_lipschitz_on_simulated_stats(self):
        drift = DriftMatrix(3, np.array([[-1.0, 0.4, 0.0], [0.0, -0.6, 0.2], [0.1, 0.0, -0.9]]))
        bundle = simulate_euler(drift, InitialLaw(), 200, 1.0, 0.01, seed=21)
        stats = compute_suffstats(bundle)
        top = float(np.max(np.linalg.eigvalsh(stats.c_hat)))
        assert stats.curvature_bound == pytest.approx(top, rel=1e-4)

    def test_dimension_mismatch(self):
        stats = SuffStats(2, np.eye(2), np.zeros((2, 2)), 1, 1.0, 0.01)
        with pytest.raises(ValueError):
            loss(stats, np.zeros((3, 3)))


class TestMartingale:
    def test_zero_at_truth_in_expectation(self):
        drift = DriftMatrix(1, np.array([[-1.0]]))
        terms = []
        for rep in range(50):
            bundle = simulate_exact(drift, InitialLaw(), 10_000, 1.0, 0.01, seed=1000 + rep)
            stats = compute_suffstats(bundle)
            terms.append(martingale_term(stats, drift.entries)[0, 0])
        terms = np.asarray(terms)
        spread = terms.std(ddof=1)
        assert abs(terms.mean()) <= 4.0 * spread / np.sqrt(len(terms))

    def test_root_n_scaling(self):
        drift = DriftMatrix(1, np.array([[-1.0]]))

        def spread_at(n, base):
            vals = [
                martingale_term(
                    compute_suffstats(
                        simulate_exact(drift, InitialLaw(), n, 1.0, 0.01, seed=base + r)
                    ),
                    drift.entries,
                )[0, 0]
                for r in range(50)
            ]
            return np.std(vals, ddof=1)

        ratio = spread_at(1000, 5000) / spread_at(4000, 9000)
        assert 2.0 / 1.3 <= ratio <= 2.0 * 1.3

    def test_exact_identity(self):
        rng = np.random.default_rng(6)
        stats = compute_suffstats(_bundle_from_array(rng.normal(size=(3, 6, 2)), 0.2))
        a = rng.normal(size=(2, 2))
        expected = stats.b_hat - a @ stats.c_hat
        assert np.allclose(martingale_term(stats, a), expected, atol=1e-14)


class TestEmpiricalSecondMoment:
    def test_mean_concentrates_near_population_value(self):
        # Benchmark-sized instance (d = 15, batches of 400 paths): the
        # expected Gram matrix, estimated by averaging seeded batches, lands
        # within 15 percent of the population value in operator norm.
        from sparse_ou.experiments import generate_drift

        drift = generate_drift(15, ExperimentPlan(), seed=1)
        target = compute_c_infty(drift).c_infty
        mean_c = np.zeros((15, 15))
        reps = 10
        for rep in range(reps):
            bundle = simulate_euler(drift, InitialLaw(), 400, 1.0, 0.01, seed=70 + rep)
            mean_c += compute_suffstats(bundle).c_hat / reps
        gap = np.linalg.norm(mean_c - target, 2)
        assert gap <= 0.15 * np.linalg.norm(target, 2)


class TestSerialization:
    def test_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        stats = compute_suffstats(_bundle_from_array(rng.normal(size=(4, 11, 3)), 0.1))
        target = tmp_path / "stats.json"
        stats_to_json(stats, target)
        parsed = stats_from_json(target)
        assert np.array_equal(parsed.c_hat, stats.c_hat)
        assert np.array_equal(parsed.b_hat, stats.b_hat)
        assert parsed.n_paths == stats.n_paths
        assert parsed.terminal == stats.terminal
        assert parsed.step == stats.step

    def test_json_is_plain_object(self, tmp_path):
        stats = SuffStats(1, np.eye(1), np.eye(1), 2, 1.0, 0.5)
        target = tmp_path / "stats.json"
        stats_to_json(stats, target)
        payload = json.loads(target.read_text())
        assert payload["dim"] == 1
        assert payload["n_paths"] == 2

    def test_corrupt_json_raises_oserror(self, tmp_path):
        target = tmp_path / "stats.json"
        target.write_text("{not json")
        with pytest.raises(OSError):
            stats_from_json(target)

    def test_asymmetric_c_hat_rejected(self):
        with pytest.raises(ValueError):
            SuffStats(2, np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros((2, 2)), 1, 1.0, 0.01)
