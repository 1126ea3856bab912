import math

import numpy as np
import pytest

from satpipe import analysis, dbn
from satpipe.errors import DataError


class TestSeparability:
    def test_hand_computed_example(self):
        values = np.array([0.0, 0.2, 0.8, 1.0])
        labels = np.array([0, 0, 1, 1])
        report = analysis.separability(values, labels)
        assert report.class_means[0, 0] == pytest.approx(0.1)
        assert report.class_means[1, 0] == pytest.approx(0.9)
        assert report.class_stds[0, 0] == pytest.approx(0.1)
        assert report.delta_mean[0] == pytest.approx(0.8, abs=1e-12)
        assert report.delta_sigma[0] == pytest.approx(0.1, abs=1e-12)
        assert report.d_s[0] == pytest.approx(8.0, abs=1e-12)

    def test_identical_classes_zero(self):
        values = np.array([0.0, 0.2, 0.0, 0.2])
        labels = np.array([0, 0, 1, 1])
        report = analysis.separability(values, labels)
        assert report.delta_mean[0] == 0.0
        assert report.d_s[0] == 0.0

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            analysis.separability(np.array([1.0, 2.0]), np.array([0, 0]))

    def test_matches_two_pass_brute_force(self, rng):
        values = rng.normal(size=(100, 3))
        labels = rng.integers(0, 2, size=100)
        report = analysis.separability(values, labels)
        for j in range(3):
            a = [values[i, j] for i in range(100) if labels[i] == 0]
            b = [values[i, j] for i in range(100) if labels[i] == 1]
            mu_a, mu_b = sum(a) / len(a), sum(b) / len(b)
            sd_a = math.sqrt(sum((v - mu_a) ** 2 for v in a) / len(a))
            sd_b = math.sqrt(sum((v - mu_b) ** 2 for v in b) / len(b))
            assert report.delta_mean[j] == pytest.approx(abs(mu_a - mu_b), abs=1e-12)
            assert report.delta_sigma[j] == pytest.approx((sd_a + sd_b) / 2, abs=1e-12)
            assert report.d_s[j] == pytest.approx(
                abs(mu_a - mu_b) / ((sd_a + sd_b) / 2), abs=1e-9
            )

    def test_multiclass_pairs(self, rng):
        # three classes at means 0, 1, 3 with equal spread
        values = np.concatenate([rng.normal(m, 0.1, size=50) for m in (0.0, 1.0, 3.0)])
        labels = np.repeat([0, 1, 2], 50)
        report = analysis.separability(values, labels)
        mus = [values[labels == c].mean() for c in range(3)]
        expected = (abs(mus[0] - mus[1]) + abs(mus[0] - mus[2]) + abs(mus[1] - mus[2])) / 3
        assert report.delta_mean[0] == pytest.approx(expected, abs=1e-12)

    def test_constant_feature_everywhere(self):
        values = np.ones(10)
        labels = np.repeat([0, 1], 5)
        report = analysis.separability(values, labels)
        assert report.d_s[0] == 0.0

    def test_zero_spread_distinct_means_is_inf(self):
        values = np.repeat([0.0, 1.0], 5)
        labels = np.repeat([0, 1], 5)
        report = analysis.separability(values, labels)
        assert report.d_s[0] == np.inf


class TestRankFeatures:
    def test_indicator_beats_noise(self, rng):
        n = 200
        labels = rng.integers(0, 2, size=n)
        values = np.column_stack([labels.astype(float), rng.normal(size=n)])
        ranking = analysis.rank_features(values, labels, ["indicator", "noise"])
        assert ranking.names() == ["indicator", "noise"]

    def test_scale_invariance(self, rng):
        values = rng.normal(size=(120, 6)) + rng.integers(0, 3, size=(120, 1))
        labels = rng.integers(0, 3, size=120)
        base = analysis.rank_features(values, labels).names()
        for j in range(6):
            scaled = values.copy()
            scaled[:, j] *= 3.0
            assert analysis.rank_features(scaled, labels).names() == base

    def test_shift_leaves_criterion_unchanged(self, rng):
        values = rng.normal(size=(80, 2))
        labels = rng.integers(0, 2, size=80)
        before = analysis.separability(values, labels)
        shifted = values + 100.0
        after = analysis.separability(shifted, labels)
        np.testing.assert_allclose(after.delta_sigma, before.delta_sigma, atol=1e-9)
        np.testing.assert_allclose(after.delta_mean, before.delta_mean, atol=1e-9)

    def test_deterministic_tie_break(self):
        values = np.repeat([[0.0, 0.0]], 10, axis=0)
        labels = np.repeat([0, 1], 5)
        ranking = analysis.rank_features(values, labels, ["zeta", "alpha"])
        assert ranking.names() == ["alpha", "zeta"]

    def test_csv_and_json_export(self, tmp_path, rng):
        values = rng.normal(size=(50, 3))
        labels = rng.integers(0, 2, size=50)
        ranking = analysis.rank_features(values, labels, ["a", "b", "c"])
        analysis.ranking_to_csv(ranking, tmp_path / "r.csv")
        analysis.ranking_to_json(ranking, tmp_path / "r.json")
        header = (tmp_path / "r.csv").read_text().splitlines()[0]
        assert header == "rank,feature,delta_mean,delta_sigma,d_s"


class TestLayerSeparability:
    def test_zero_weight_network(self, rng):
        stack = [dbn.RbmParams(np.zeros((6, 4)), np.zeros(6), np.zeros(4))]
        model = dbn.init_classifier(stack, 2, seed=0)
        x = rng.random((30, 6))
        labels = rng.integers(0, 2, size=30)
        values = analysis.layer_separability(model, x, labels)
        assert values == [0.0]

    def test_deterministic(self, rng):
        stack = [dbn.random_rbm(6, 4, rng, 0.5), dbn.random_rbm(4, 3, rng, 0.5)]
        model = dbn.init_classifier(stack, 2, seed=0)
        x = rng.random((40, 6))
        labels = rng.integers(0, 2, size=40)
        a = analysis.layer_separability(model, x, labels)
        b = analysis.layer_separability(model, x, labels)
        assert a == b
        assert len(a) == 2

    def test_per_unit_mode(self, rng):
        stack = [dbn.random_rbm(5, 4, rng, 0.5)]
        model = dbn.init_classifier(stack, 2, seed=0)
        x = rng.random((40, 5))
        labels = rng.integers(0, 2, size=40)
        sample = analysis.layer_separability(model, x, labels, mode="sample_mean")
        per_unit = analysis.layer_separability(model, x, labels, mode="per_unit_mean")
        assert len(sample) == len(per_unit) == 1
        with pytest.raises(ValueError):
            analysis.layer_separability(model, x, labels, mode="bogus")


class TestIntrinsicDimension:
    def test_line_in_10d(self, rng):
        t = rng.random(2000)
        direction = rng.normal(size=10)
        direction /= np.linalg.norm(direction)
        points = np.outer(t, direction)
        estimate = analysis.intrinsic_dimension(points, k=10, seed=1)
        assert abs(estimate.dimension - 1.0) <= 0.2

    def test_square_in_5d(self, rng):
        t = rng.random((2000, 2))
        basis = np.linalg.qr(rng.normal(size=(5, 2)))[0]
        points = t @ basis.T
        estimate = analysis.intrinsic_dimension(points, k=10, seed=2)
        assert abs(estimate.dimension - 2.0) <= 0.3

    def test_rigid_motion_and_scale_invariance(self, rng):
        t = rng.random((1500, 2))
        basis = np.linalg.qr(rng.normal(size=(5, 2)))[0]
        points = t @ basis.T
        rotation = np.linalg.qr(rng.normal(size=(5, 5)))[0]
        transformed = 3.7 * points @ rotation.T + 11.0
        a = analysis.intrinsic_dimension(points, k=10, seed=3)
        b = analysis.intrinsic_dimension(transformed, k=10, seed=3)
        assert b.dimension == pytest.approx(a.dimension, abs=1e-6)

    def test_duplicates_dropped_with_warning(self, rng):
        points = rng.random((50, 3))
        stacked = np.vstack([points, points[:10]])
        with pytest.warns(UserWarning):
            estimate = analysis.intrinsic_dimension(stacked, k=5, seed=0)
        assert estimate.dimension > 0

    def test_sample_size_errors(self, rng):
        with pytest.raises(DataError):
            analysis.intrinsic_dimension(rng.random((5, 3)), k=10)
        with pytest.raises(DataError):
            analysis.intrinsic_dimension(rng.random((10, 3)), k=1)
        with pytest.raises(ValueError):
            analysis.intrinsic_dimension(np.array([[np.nan, 1.0]] * 20), k=2)

    def test_deterministic(self, rng):
        points = rng.random((300, 4))
        a = analysis.intrinsic_dimension(points, k=8, seed=5)
        b = analysis.intrinsic_dimension(points, k=8, seed=5)
        assert a.dimension == b.dimension


class TestHypersphere:
    def test_closed_forms(self):
        assert analysis.hypersphere_relative_volume(2) == pytest.approx(
            math.pi / 4, abs=1e-12
        )
        assert analysis.hypersphere_relative_volume(3) == pytest.approx(
            math.pi / 6, abs=1e-12
        )

    def test_recurrence(self):
        for n in range(1, 101):
            ratio = analysis.hypersphere_relative_volume(n + 2) / analysis.hypersphere_relative_volume(n)
            assert ratio == pytest.approx(math.pi / (2 * (n + 2)), abs=1e-12)

    def test_strictly_decreasing_to_zero(self):
        values = [analysis.hypersphere_relative_volume(n) for n in range(1, 200)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-100

    def test_domain_error(self):
        with pytest.raises(ValueError):
            analysis.hypersphere_relative_volume(0)
        with pytest.raises(ValueError):
            analysis.hypersphere_relative_volume(2.5)
