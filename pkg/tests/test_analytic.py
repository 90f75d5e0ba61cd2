"""Closed-form risk model: exact values, thresholds, samplers."""

import numpy as np
import pytest
from scipy import stats

from werm.analytic import (
    AnalyticModel,
    closed_form_threshold,
    excess_error,
    optimal_threshold,
    risk_curve,
    sample,
    sample_pu,
    threshold_loss,
    true_eta,
    true_risk,
)
from werm.core import DomainError, LossSpec, SchemaError, ValidationError, per_record_losses


class TestTrueRisk:
    def test_hand_value(self):
        m = AnalyticModel(1.0, 1.0, 0.3)
        assert true_risk(m, 0.7) == pytest.approx(0.210, abs=1e-12)

    def test_boundaries(self):
        m = AnalyticModel(2.0, 0.5, 0.3)
        assert true_risk(m, 0.0) == pytest.approx(1 - m.p)
        assert true_risk(m, 1.0) == pytest.approx(m.p)

    def test_domain(self):
        with pytest.raises(DomainError):
            true_risk(AnalyticModel(1, 1, 0.5), 1.2)

    def test_model_validation(self):
        with pytest.raises(ValidationError):
            AnalyticModel(-1.0, 0.0, 0.5)
        with pytest.raises(ValidationError):
            AnalyticModel(1.0, 1.0, 0.0)


class TestOptimalThreshold:
    def test_known_exact_values(self):
        # (1,1): 1-p; (2,2) and (1/2,1/2) by their radical forms
        assert optimal_threshold(AnalyticModel(1, 1, 0.3)) == pytest.approx(0.7, abs=1e-9)
        assert optimal_threshold(AnalyticModel(2, 2, 0.5)) == pytest.approx(0.5, abs=1e-9)
        assert optimal_threshold(AnalyticModel(0.5, 0.5, 0.5)) == pytest.approx(0.5, abs=1e-9)

    @pytest.mark.parametrize("pair", [(0.5, 0.5), (1.0, 1.0), (2.0, 2.0)])
    def test_bisection_matches_closed_form(self, pair):
        for p in np.arange(0.1, 0.95, 0.1):
            m = AnalyticModel(pair[0], pair[1], float(p))
            assert optimal_threshold(m) == pytest.approx(
                closed_form_threshold(m), abs=1e-8
            )

    def test_uniform_case_picks_boundary_by_slope(self):
        assert optimal_threshold(AnalyticModel(0, 0, 0.3)) == 1.0
        assert optimal_threshold(AnalyticModel(0, 0, 0.7)) == 0.0

    def test_uniform_balanced_flags_non_unique(self):
        with pytest.warns(UserWarning, match="non-unique"):
            assert optimal_threshold(AnalyticModel(0, 0, 0.5)) == 0.5

    def test_minimizer_property_random_models(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            m = AnalyticModel(
                float(rng.uniform(0.05, 4.0)),
                float(rng.uniform(0.05, 4.0)),
                float(rng.uniform(0.05, 0.95)),
            )
            theta = optimal_threshold(m)
            base = true_risk(m, theta)
            for probe in (theta - 1e-4, theta + 1e-4):
                if 0.0 <= probe <= 1.0:
                    assert true_risk(m, probe) >= base - 1e-12


class TestExcessError:
    def test_hand_value(self):
        assert excess_error(AnalyticModel(1, 1, 0.3), 0.5) == pytest.approx(0.04, abs=1e-9)

    def test_zero_at_matching_prior(self):
        assert excess_error(AnalyticModel(2, 2, 0.4), 0.4) == 0.0

    @pytest.mark.filterwarnings("ignore:risk is constant")
    def test_uniform_balanced_is_flat(self):
        m = AnalyticModel(0, 0, 0.5)
        for pp in (0.1, 0.4, 0.9):
            assert excess_error(m, pp) == pytest.approx(0.0, abs=1e-12)

    def test_nondecreasing_away_from_p(self):
        m = AnalyticModel(1.0, 2.0, 0.4)
        right = [excess_error(m, pp) for pp in np.arange(0.4, 0.96, 0.05)]
        left = [excess_error(m, pp) for pp in np.arange(0.4, 0.04, -0.05)]
        for seq in (right, left):
            assert all(b >= a - 1e-12 for a, b in zip(seq, seq[1:]))


class TestSampler:
    def test_alpha_zero_gives_uniform_positives(self):
        m = AnalyticModel(0.0, 1.0, 0.5)
        data = sample(m, 50_000, 0.5, 3)
        x_pos = data.features[data.labels == 1, 0]
        stat = stats.kstest(x_pos, "uniform").statistic
        assert stat <= 1.63 / np.sqrt(x_pos.size)

    def test_positive_cdf_matches_power_law(self):
        m = AnalyticModel(1.5, 1.0, 0.5)
        data = sample(m, 100_000, 0.75, 4)
        x_pos = data.features[data.labels == 1, 0]
        stat = stats.kstest(x_pos, lambda v: v ** (1.0 + m.alpha)).statistic
        assert stat <= 1.63 / np.sqrt(x_pos.size)

    def test_negative_cdf_matches_power_law(self):
        m = AnalyticModel(1.0, 2.0, 0.5)
        data = sample(m, 100_000, 0.25, 5)
        x_neg = data.features[data.labels == 0, 0]
        stat = stats.kstest(x_neg, lambda v: 1 - (1 - v) ** (1.0 + m.beta)).statistic
        assert stat <= 1.63 / np.sqrt(x_neg.size)

    def test_deterministic_per_seed(self):
        m = AnalyticModel(1.0, 1.0, 0.5)
        a = sample(m, 100, 0.4, 12)
        b = sample(m, 100, 0.4, 12)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_label_rate(self):
        m = AnalyticModel(1.0, 1.0, 0.5)
        data = sample(m, 100_000, 0.3, 6)
        assert data.n_pos / data.n == pytest.approx(0.3, abs=0.01)

    def test_pu_sampler_rates_and_mixture(self):
        m = AnalyticModel(1.0, 1.0, 0.4)
        data = sample_pu(m, 100_000, 0.25, 7)
        assert data.n_pos / data.n == pytest.approx(0.25, abs=0.01)
        # unlabeled records follow the marginal p*F+ + (1-p)*F-
        x_unl = data.features[data.labels == 0, 0]
        cdf = lambda v: m.p * v**2 + (1 - m.p) * (1 - (1 - v) ** 2)
        assert stats.kstest(x_unl, cdf).statistic <= 1.63 / np.sqrt(x_unl.size)


class TestThresholdLoss:
    def test_positive_above_threshold_errs(self):
        from werm.core import Record

        assert threshold_loss(0.5, Record(np.array([0.8]), label=1)) == 1
        assert threshold_loss(0.5, Record(np.array([0.2]), label=1)) == 0

    def test_boundary_convention(self):
        from werm.core import Record

        assert threshold_loss(0.5, Record(np.array([0.5]), label=0)) == 0
        assert threshold_loss(0.5, Record(np.array([0.5]), label=1)) == 1

    def test_complement_of_risk_oriented_loss(self):
        data = sample(AnalyticModel(1, 1, 0.5), 200, 0.5, 9)
        flipped = per_record_losses(
            data, LossSpec("threshold-sign", positive_above=False), 0.37
        )
        direct = np.array([threshold_loss(0.37, r) for r in data.records()])
        np.testing.assert_array_equal(flipped, direct)
        oriented = per_record_losses(data, LossSpec("threshold-sign"), 0.37)
        np.testing.assert_array_equal(oriented + flipped, 1.0)

    def test_schema_checks(self):
        from werm.core import Record

        with pytest.raises(SchemaError):
            threshold_loss(0.5, Record(np.array([0.1, 0.2]), label=1))
        with pytest.raises(SchemaError):
            threshold_loss(0.5, Record(np.array([0.1]), label=None))

    def test_population_mean_matches_risk(self):
        """MC check that the risk-oriented loss estimates true_risk."""
        m = AnalyticModel(1.0, 2.0, 0.35)
        data = sample(m, 200_000, m.p, 10)
        est = per_record_losses(data, LossSpec("threshold-sign"), 0.4).mean()
        assert est == pytest.approx(true_risk(m, 0.4), abs=0.005)


class TestTrueEta:
    def test_matches_density_ratio(self):
        m = AnalyticModel(1.0, 2.0, 0.3)
        eta = true_eta(m)
        x = np.array([[0.2], [0.5], [0.9]])
        f_pos = 2.0 * x[:, 0]
        f_neg = 3.0 * (1 - x[:, 0]) ** 2
        expected = m.p * f_pos / (m.p * f_pos + (1 - m.p) * f_neg)
        np.testing.assert_allclose(eta(x), expected, atol=1e-12)

    def test_boundary_values(self):
        m = AnalyticModel(1.0, 1.0, 0.5)
        eta = true_eta(m)
        np.testing.assert_allclose(eta(np.array([[0.0]])), 0.0)
        np.testing.assert_allclose(eta(np.array([[1.0]])), 1.0)


class TestFiniteSampleConsistency:
    def test_weighted_erm_lands_near_optimum(self):
        """Minimizing the ideally weighted empirical risk over a 1e-3 grid
        with n = 1e5 biased samples lands within 0.02 of the true optimum
        in at least 18 of 20 seeded replicates."""
        m = AnalyticModel(1.0, 1.0, 0.3)
        p_train, n = 0.6, 100_000
        grid = np.arange(0.0, 1.0 + 1e-9, 1e-3)
        theta_star = optimal_threshold(m)
        w_pos, w_neg = m.p / p_train, (1 - m.p) / (1 - p_train)
        hits = 0
        for rep in range(20):
            data = sample(m, n, p_train, [31415, rep])
            x = data.features[:, 0]
            pos = data.labels == 1
            xs_pos = np.sort(x[pos])
            xs_neg = np.sort(x[~pos])
            risk = (
                w_pos * np.searchsorted(xs_pos, grid, side="left")
                + w_neg * (xs_neg.size - np.searchsorted(xs_neg, grid, side="left"))
            ) / n
            # spot-check the vectorized sweep against the library evaluation
            if rep == 0:
                from werm.core import WeightVector, weighted_empirical_risk

                w = WeightVector(np.where(pos, w_pos, w_neg))
                for t in grid[:: len(grid) // 10]:
                    direct = weighted_empirical_risk(
                        data, w, LossSpec("threshold-sign"), float(t)
                    )
                    sweep = risk[np.searchsorted(grid, t)]
                    assert sweep == pytest.approx(direct, abs=1e-10)
            hits += abs(grid[np.argmin(risk)] - theta_star) <= 0.02
        assert hits >= 18


def test_risk_curve_shapes():
    thetas, risks = risk_curve(AnalyticModel(1, 1, 0.3), n_points=11)
    assert thetas.shape == risks.shape == (11,)
    assert risks[0] == pytest.approx(0.7) and risks[-1] == pytest.approx(0.3)
