"""Plug-in weight estimators, Kaplan-Meier, and IPCW."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from werm import analytic
from werm.core import (
    Dataset,
    DegenerateClassError,
    EmptyStratumError,
    LossSpec,
    PositivityViolationError,
    SchemaError,
    ValidationError,
    weighted_empirical_risk,
)
from werm.weights import (
    EtaEstimate,
    KmCurve,
    TargetPrior,
    class_shift_weights,
    ipcw_weights,
    km_fit,
    oracle_class_shift_weights,
    pu_risk_offset,
    pu_weights,
    pu_weights_eta,
    stratum_shift_weights,
)

THRESH = LossSpec("threshold-sign")


def labeled(labels, strata=None):
    labels = np.asarray(labels)
    return Dataset(
        features=np.zeros((labels.size, 1)), labels=labels, strata=strata, n_classes=2
    )


class TestTargetPrior:
    def test_p_out_of_range(self):
        with pytest.raises(ValidationError):
            TargetPrior(p=0.0)
        with pytest.raises(ValidationError):
            TargetPrior(p=1.0)

    def test_pk_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            TargetPrior(pk=(0.5, 0.4))
        TargetPrior(pk=(1.0,))  # single stratum allowed

    def test_negative_zeta_rejected(self):
        with pytest.raises(ValidationError):
            TargetPrior(p=0.5, zeta=-0.1)


class TestClassShift:
    def test_derived_example(self):
        # labels [+,+,-,-,-], p = 0.6 -> w+ = 1.5, w- = 2/3
        w = class_shift_weights(labeled([1, 1, 0, 0, 0]), TargetPrior(p=0.6))
        np.testing.assert_allclose(w.weights[:2], 1.5)
        np.testing.assert_allclose(w.weights[2:], 2.0 / 3.0)
        assert abs(w.mean - 1.0) <= 1e-12

    def test_empirical_rate_gives_unit_weights(self):
        data = labeled([1, 1, 0, 0, 0])
        w = class_shift_weights(data, TargetPrior(p=2.0 / 5.0))
        np.testing.assert_allclose(w.weights, 1.0, atol=1e-15)

    def test_single_class_degenerate(self):
        with pytest.raises(DegenerateClassError) as err:
            class_shift_weights(labeled([1, 1, 1]), TargetPrior(p=0.5))
        assert err.value.group == 0

    def test_reproduces_two_ratio_objective(self):
        """Core's (1/n) sum w*loss equals the per-class count-normalized form."""
        rng = np.random.default_rng(5)
        x = rng.random(40)
        y = rng.integers(0, 2, 40)
        y[:2] = [0, 1]
        data = Dataset(features=x[:, None], labels=y, n_classes=2)
        p, theta = 0.35, 0.6
        w = class_shift_weights(data, TargetPrior(p=p))
        via_core = weighted_empirical_risk(data, w, THRESH, theta)
        pos = y == 1
        direct = (p / pos.sum()) * np.sum(x[pos] < theta) + (
            (1 - p) / (~pos).sum()
        ) * np.sum(x[~pos] >= theta)
        assert via_core == pytest.approx(direct, abs=1e-12)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_mean_weight_is_one(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 60))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        w = class_shift_weights(labeled(y), TargetPrior(p=float(rng.uniform(0.05, 0.95))))
        assert abs(w.mean - 1.0) <= 1e-12


class TestStratumShift:
    def test_derived_example(self):
        # strata [0,0,1], pk = [.5,.5] -> [0.75, 0.75, 1.5]
        data = labeled([0, 1, 0], strata=[0, 0, 1])
        w = stratum_shift_weights(data, TargetPrior(pk=(0.5, 0.5)))
        np.testing.assert_allclose(w.weights, [0.75, 0.75, 1.5])

    def test_empirical_frequencies_give_unit_weights(self):
        data = labeled([0, 1, 0, 1], strata=[0, 0, 1, 2])
        w = stratum_shift_weights(data, TargetPrior(pk=(0.5, 0.25, 0.25)))
        np.testing.assert_allclose(w.weights, 1.0, atol=1e-15)

    def test_single_stratum(self):
        data = labeled([0, 1], strata=[0, 0])
        w = stratum_shift_weights(data, TargetPrior(pk=(1.0,)))
        np.testing.assert_allclose(w.weights, 1.0)

    def test_empty_stratum_named(self):
        data = labeled([0, 1], strata=[0, 0])
        with pytest.raises(EmptyStratumError) as err:
            stratum_shift_weights(data, TargetPrior(pk=(0.5, 0.5)))
        assert err.value.stratum == 1

    def test_reproduces_count_normalized_objective(self):
        rng = np.random.default_rng(6)
        n = 60
        x = rng.random(n)
        y = rng.integers(0, 2, n)
        s = rng.integers(0, 3, n)
        s[:3] = [0, 1, 2]
        y[:2] = [0, 1]
        data = Dataset(features=x[:, None], labels=y, strata=s, n_classes=2)
        pk = np.array([0.2, 0.5, 0.3])
        theta = 0.45
        w = stratum_shift_weights(data, TargetPrior(pk=tuple(pk)))
        via_core = weighted_empirical_risk(data, w, THRESH, theta)
        loss = np.where(y == 1, x < theta, x >= theta).astype(float)
        counts = np.bincount(s, minlength=3)
        direct = sum(
            pk[k] / counts[k] * loss[s == k].sum() for k in range(3)
        )
        assert via_core == pytest.approx(direct, abs=1e-12)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_mean_weight_is_one(self, seed):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(1, 6))
        n = int(rng.integers(K, 60) + K)
        s = np.concatenate([np.arange(K), rng.integers(0, K, n - K)])
        pk = rng.random(K) + 0.1
        pk = pk / pk.sum()
        data = labeled(rng.integers(0, 2, n), strata=s)
        w = stratum_shift_weights(data, TargetPrior(pk=tuple(pk)))
        assert abs(w.mean - 1.0) <= 1e-12


class TestPu:
    def test_derived_example(self):
        # n=4, n_pos=1, p=0.3 -> w+ = 2.4, w- = 4/3
        w = pu_weights(labeled([1, 0, 0, 0]), TargetPrior(p=0.3))
        assert w.weights[0] == pytest.approx(2.4)
        np.testing.assert_allclose(w.weights[1:], 4.0 / 3.0)

    def test_balanced_case(self):
        w = pu_weights(labeled([1, 1, 0, 0]), TargetPrior(p=0.5))
        np.testing.assert_allclose(w.weights, 2.0)

    def test_no_positives_errors(self):
        with pytest.raises(DegenerateClassError):
            pu_weights(labeled([0, 0]), TargetPrior(p=0.5))

    def test_offset(self):
        assert pu_risk_offset(TargetPrior(p=0.3)) == -0.3
        assert pu_risk_offset(TargetPrior(p=1e-9)) == pytest.approx(0.0, abs=1e-8)
        assert pu_risk_offset(TargetPrior(p=1 - 1e-12)) == pytest.approx(-1.0)

    def test_reproduces_direct_objective(self):
        m = analytic.AnalyticModel(1.0, 1.0, 0.4)
        data = analytic.sample_pu(m, 300, 0.3, 11)
        w = pu_weights(data, TargetPrior(p=m.p))
        theta = 0.55
        via_core = weighted_empirical_risk(data, w, THRESH, theta)
        x = data.features[:, 0]
        pos = data.labels == 1
        direct = (2 * m.p / pos.sum()) * np.sum(x[pos] < theta) + (
            1.0 / (~pos).sum()
        ) * np.sum(x[~pos] >= theta)
        assert via_core == pytest.approx(direct, abs=1e-12)


class TestPuEta:
    def test_derived_examples(self):
        data = labeled([1, 1, 1, 1, 0, 0, 0, 0, 0, 0])
        eta = EtaEstimate(lambda X: np.full(len(X), 0.2))
        w = pu_weights_eta(data, TargetPrior(p=0.5), eta)
        np.testing.assert_allclose(w.weights[:4], 1.25)  # n*p/n_pos = 10*0.5/4
        np.testing.assert_allclose(w.weights[4:], 0.8 / 0.6)  # (1-eta)/(1-n_pos/n)

    def test_eta_one_zeroes_unlabeled(self):
        data = labeled([1, 0, 0])
        eta = EtaEstimate(lambda X: np.ones(len(X)))
        w = pu_weights_eta(data, TargetPrior(p=0.5), eta)
        np.testing.assert_allclose(w.weights[1:], 0.0)

    def test_all_positive_degenerate(self):
        eta = EtaEstimate(lambda X: np.zeros(len(X)))
        with pytest.raises(DegenerateClassError):
            pu_weights_eta(labeled([1, 1]), TargetPrior(p=0.5), eta)

    def test_eta_output_clamped(self):
        eta = EtaEstimate(lambda X: np.full(len(X), 3.0))
        np.testing.assert_allclose(eta(np.zeros((4, 1))), 1.0)

    def test_true_eta_gives_consistent_risk(self):
        """Monte-Carlo: plugging the exact posterior into the PU weights
        estimates the test risk (4 standard errors of the replicate mean)."""
        m = analytic.AnalyticModel(1.0, 1.0, 0.4)
        q, n, reps, theta = 0.3, 2000, 400, 0.45
        target = analytic.true_risk(m, theta)
        eta = analytic.true_eta(m)
        prior = TargetPrior(p=m.p)
        vals = []
        for r in range(reps):
            data = analytic.sample_pu(m, n, q, [4242, r])
            w = pu_weights_eta(data, prior, eta)
            vals.append(weighted_empirical_risk(data, w, THRESH, theta))
        vals = np.array(vals)
        se = vals.std(ddof=1) / np.sqrt(reps)
        assert abs(vals.mean() - target) <= 4 * se


class TestIdealWeightUnbiasedness:
    def test_monte_carlo_mean_matches_true_risk(self):
        """E[(1/n) sum phi(y_i) loss_i] equals the exact risk; checked with
        2000 replicates at 4 standard errors."""
        m = analytic.AnalyticModel(1.0, 1.0, 0.3)
        p_train, n, reps, theta = 0.6, 200, 2000, 0.5
        target = analytic.true_risk(m, theta)
        vals = []
        for r in range(reps):
            data = analytic.sample(m, n, p_train, [31337, r])
            w = oracle_class_shift_weights(data, m.p, p_train)
            vals.append(weighted_empirical_risk(data, w, THRESH, theta))
        vals = np.array(vals)
        se = vals.std(ddof=1) / np.sqrt(reps)
        assert abs(vals.mean() - target) <= 4 * se


class TestKaplanMeier:
    def test_hand_product_limit(self):
        km = km_fit([2.0, 3.0, 5.0, 7.0], [True, True, False, True])
        np.testing.assert_array_equal(km.times, [2.0, 3.0, 7.0])
        np.testing.assert_allclose(km.survival, [0.75, 0.5, 0.0])
        np.testing.assert_allclose(km.survival_at([2, 3, 5, 7]), [0.75, 0.5, 0.5, 0.0])

    def test_no_events_is_all_ones(self):
        km = km_fit([1.0, 2.0, 3.0], [False, False, False])
        assert km.times.size == 0
        np.testing.assert_allclose(km.survival_at([0.0, 5.0]), 1.0)

    def test_single_event(self):
        km = km_fit([4.0], [True])
        np.testing.assert_allclose(km.survival_at(4.0), 0.0)
        np.testing.assert_allclose(km.survival_before(4.0), 1.0)

    def test_all_events_equals_empirical_survival(self):
        rng = np.random.default_rng(8)
        t = rng.exponential(size=200)
        km = km_fit(t, np.ones(200, dtype=bool))
        for probe in rng.choice(t, size=20, replace=False):
            assert km.survival_at(probe) == pytest.approx(np.mean(t > probe), abs=1e-12)

    def test_ties_events_processed_before_censorings(self):
        # the record censored at t=2 stays at risk for the event at t=2
        km = km_fit([2.0, 2.0, 3.0], [True, False, True])
        np.testing.assert_allclose(km.survival_at(2.0), 2.0 / 3.0)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            km_fit([], [])

    def test_csv_round_trip(self, tmp_path):
        km = km_fit([2.0, 3.0, 5.0, 7.0], [True, True, False, True])
        path = tmp_path / "km.csv"
        km.to_csv(path)
        back = KmCurve.from_csv(path, n_at_entry=km.n_at_entry)
        np.testing.assert_array_equal(back.times, km.times)
        np.testing.assert_array_equal(back.survival, km.survival)


class TestIpcw:
    def survival_data(self, times, events):
        times = np.asarray(times, dtype=float)
        return Dataset(
            features=np.zeros((times.size, 1)),
            labels=np.zeros(times.size, dtype=int),
            times=times,
            events=events,
            n_classes=2,
        )

    def test_censored_records_get_zero(self):
        data = self.survival_data([1.0, 2.0], [True, False])
        km = km_fit(data.times, ~data.events)
        w = ipcw_weights(data, km)
        assert w.weights[1] == 0.0

    def test_uncensored_only_gives_unit_weights(self):
        data = self.survival_data([1.0, 2.0, 3.0], [True, True, True])
        km = km_fit(data.times, ~data.events)
        np.testing.assert_allclose(ipcw_weights(data, km).weights, 1.0)

    def test_half_survival_doubles_weight(self):
        # censoring events at t=1,2 leave S_cens(3-) = 0.5 * ... build directly
        km = KmCurve(times=np.array([2.0]), survival=np.array([0.5]), n_at_entry=4)
        data = self.survival_data([3.0], [True])
        assert ipcw_weights(data, km).weights[0] == pytest.approx(2.0)

    def test_positivity_violation_names_record(self):
        km = KmCurve(times=np.array([1.0]), survival=np.array([0.0]), n_at_entry=2)
        data = self.survival_data([0.5, 2.0], [True, True])
        with pytest.raises(PositivityViolationError) as err:
            ipcw_weights(data, km)
        assert err.value.record_index == 1

    def test_needs_survival_fields(self):
        data = Dataset(features=np.zeros((2, 1)), labels=[0, 1])
        km = km_fit([1.0], [True])
        with pytest.raises(SchemaError):
            ipcw_weights(data, km)


def test_weight_vector_csv_round_trip(tmp_path):
    from werm.core import WeightVector

    w = WeightVector(np.array([0.5, 2.0, 0.0]))
    path = tmp_path / "w.csv"
    w.to_csv(path)
    back = WeightVector.from_csv(path)
    np.testing.assert_array_equal(back.weights, w.weights)
