import logging

import numpy as np
import pytest

from evaluation import (
    BootstrapCI,
    DetectionDelays,
    StatisticsError,
    bootstrap_ci,
    cohens_d,
    evaluate_alarms,
    f1_score,
    network_alarm,
    time_to_detection,
)


class TestNetworkAlarm:
    def test_zero_scores(self):
        assert network_alarm(np.zeros((3, 4))).tolist() == [0, 0, 0]

    def test_single_high_node(self):
        final = np.array([[0.1, 0.9, 0.2]])
        assert network_alarm(final, tau=0.5).tolist() == [1]

    def test_threshold_is_strict(self):
        assert network_alarm(np.full((1, 3), 0.5), tau=0.5).tolist() == [0]

    def test_unscored_rows_never_alarm(self):
        final = np.array([[np.nan, np.nan], [0.2, 0.8]])
        assert network_alarm(final).tolist() == [0, 1]


class TestF1Score:
    def test_perfect(self):
        m = f1_score([0, 1, 1, 0], [0, 1, 1, 0])
        assert (m.f1, m.precision, m.recall) == (1.0, 1.0, 1.0)

    def test_counts(self):
        truth = [1] * 10 + [0] * 10
        pred = [1] * 8 + [0] * 2 + [1] * 2 + [0] * 8
        m = f1_score(pred, truth)
        assert m.precision == pytest.approx(0.8)
        assert m.recall == pytest.approx(0.8)
        assert m.f1 == pytest.approx(0.8)

    def test_no_true_positive(self):
        m = f1_score([0, 0, 0], [0, 1, 1])
        assert m.f1 == 0.0

    def test_all_negative_everywhere(self):
        assert f1_score([0, 0], [0, 0]).f1 == 0.0

    def test_harmonic_mean(self):
        rng = np.random.default_rng(0)
        m = f1_score(rng.integers(0, 2, 200), rng.integers(0, 2, 200))
        assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            f1_score([0, 1], [0, 1, 1])


class TestTimeToDetection:
    def test_sustained_from_onset(self):
        assert time_to_detection([0, 0, 1, 1, 1, 0], [2], sustain_k=2).delays == [0.0]

    def test_late_alarms(self):
        assert time_to_detection([0, 0, 0, 0, 1, 1, 0], [2], sustain_k=2).delays == [2.0]

    def test_single_blip_is_not_sustained(self):
        delays = time_to_detection([0, 1, 0, 1, 0, 0], [1], sustain_k=2)
        assert delays.delays == [None]
        assert delays.mean_hours is None
        assert delays.undetected == 1

    def test_no_alarms(self):
        delays = time_to_detection(np.zeros(10, dtype=int), [3, 7], sustain_k=2)
        assert (delays.detected, delays.undetected, delays.mean_hours) == (0, 2, None)

    def test_detection_searched_until_next_onset(self):
        alarms = [0] * 10 + [1, 1] + [0] * 3
        delays = time_to_detection(alarms, [2, 8], sustain_k=2)
        assert delays.delays == [None, 2.0]
        assert delays.mean_hours == 2.0

    def test_step_length(self):
        assert time_to_detection([0, 0, 1, 1], [0], sustain_k=2, step_hours=0.25).delays == [0.5]

    def test_onset_outside_series(self):
        with pytest.raises(ValueError):
            time_to_detection([0, 1], [5])

    def test_delays_add(self):
        assert (DetectionDelays([1.0]) + DetectionDelays([None, 3.0])).mean_hours == 2.0


def test_evaluate_alarms_combines_f1_and_delays():
    alarms = np.array([0, 0, 1, 1, 1, 0])
    truth = np.array([0, 0, 1, 1, 1, 1])
    m = evaluate_alarms(alarms, truth, time_to_detection(alarms, [2]), tau=0.4, sustain_k=2)
    assert m.f1 == pytest.approx(2 * 0.75 / 1.75)
    assert m.ttd_hours == 0.0
    assert (m.detected, m.undetected, m.tau) == (1, 0, 0.4)
    assert set(m.to_dict()) >= {"f1", "precision", "recall", "ttd_hours"}


class TestBootstrap:
    def test_constant_metric_has_zero_width(self):
        ci = bootstrap_ci(lambda idx: 0.7, 20, n_resamples=200, seed=1)
        assert (ci.lo, ci.point, ci.hi) == (0.7, 0.7, 0.7)
        assert ci.width == 0.0

    def test_deterministic(self):
        data = np.random.default_rng(0).random(50)
        a = bootstrap_ci(lambda idx: data[idx].mean(), 50, n_resamples=300, seed=4)
        b = bootstrap_ci(lambda idx: data[idx].mean(), 50, n_resamples=300, seed=4)
        assert a == b

    def test_bounds_within_observed_range(self):
        data = np.random.default_rng(1).random(40)
        ci = bootstrap_ci(lambda idx: data[idx].mean(), 40, n_resamples=500, seed=0)
        assert data.min() <= ci.lo <= ci.point <= ci.hi <= data.max()

    def test_undefined_resamples_are_skipped(self, caplog):
        truth = np.array([1] + [0] * 9)

        def metric(idx):
            return 1.0 if truth[idx].any() else None

        with caplog.at_level(logging.WARNING):
            ci = bootstrap_ci(metric, 10, n_resamples=200, seed=0)
        assert 0 < ci.skipped < 200
        assert "Skipped" in caplog.text

    def test_too_few_samples(self):
        with pytest.raises(StatisticsError):
            bootstrap_ci(lambda idx: 1.0, 1)

    def test_interval_shrinks_with_more_samples(self):
        rng = np.random.default_rng(2)
        widths = []
        for m in (100, 400):
            data = (rng.random(m) < 0.8).astype(float)
            widths.append(bootstrap_ci(lambda idx: data[idx].mean(), m, n_resamples=1000, seed=3).width)
        assert widths[1] == pytest.approx(widths[0] / 2, rel=0.3)

    def test_to_dict(self):
        ci = BootstrapCI(point=0.5, lo=0.4, hi=0.6, n_resamples=10, seed=2)
        assert ci.to_dict() == {"point": 0.5, "lo": 0.4, "hi": 0.6, "n_resamples": 10, "seed": 2, "skipped": 0}


class TestCohensD:
    def test_identical_samples(self):
        assert cohens_d([0.1, 0.2, 0.4], [0.1, 0.2, 0.4]) == 0.0

    def test_hand_computed(self):
        # pooled sd = sqrt(2), mean difference 2
        assert cohens_d([1.0, 3.0], [-1.0, 1.0]) == pytest.approx(2.0 / np.sqrt(2.0))

    def test_zero_pooled_deviation(self):
        with pytest.raises(StatisticsError):
            cohens_d([1, 1], [0, 0])

    def test_empty_sample(self):
        with pytest.raises(StatisticsError):
            cohens_d([], [1.0, 2.0])

    def test_monte_carlo_effect(self):
        rng = np.random.default_rng(7)
        d = cohens_d(rng.normal(0.9, 0.1, 1000), rng.normal(0.8, 0.1, 1000))
        assert d == pytest.approx(1.0, abs=0.2)
