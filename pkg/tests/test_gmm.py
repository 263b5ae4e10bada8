import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glyphtrace.demo import demo_letters
from glyphtrace.gmm import (
    GmmError,
    GmmModel,
    dump_gmm,
    extract_generalized_curve,
    fit_gmm,
    generalize_letter,
    load_gmm,
    log_likelihood,
    pool_demonstrations,
    responsibilities,
    variance_floor,
)
from glyphtrace.trajectory import Trajectory, resample_by_arclength


def two_clusters(seed=7, n=200):
    rng = np.random.default_rng(seed)
    a = rng.normal([-5.0, 0.0], 1.0, size=(n, 2))
    b = rng.normal([5.0, 0.0], 1.0, size=(n, 2))
    return a, b


def standard_model():
    return GmmModel([1.0], [[0.0, 0.0]], [np.eye(2)])


class TestLogLikelihood:
    def test_density_at_mean(self):
        assert log_likelihood(standard_model(), [[0.0, 0.0]]) == pytest.approx(
            math.log(1 / (2 * math.pi)), abs=1e-12)
        assert log_likelihood(standard_model(), [[0.0, 0.0]]) == pytest.approx(-1.837877, abs=1e-6)

    def test_offset_point(self):
        assert log_likelihood(standard_model(), [[3.0, 4.0]]) == pytest.approx(
            math.log(1 / (2 * math.pi)) - 12.5, abs=1e-12)

    def test_empty(self):
        assert log_likelihood(standard_model(), np.empty((0, 2))) == 0.0

    def test_matches_direct_density_sum(self):
        rng = np.random.default_rng(1)
        model = GmmModel([0.3, 0.7], [[0, 0], [1, 2]],
                         [[[1.0, 0.3], [0.3, 0.5]], [[0.2, -0.1], [-0.1, 0.4]]])
        X = rng.normal(size=(20, 2))
        expected = 0.0
        for x in X:
            dens = 0.0
            for w, mu, cov in zip(model.weights, model.means, model.covariances):
                d = x - mu
                dens += w * math.exp(-0.5 * d @ np.linalg.solve(cov, d)) / (
                    2 * math.pi * math.sqrt(np.linalg.det(cov)))
            expected += math.log(dens)
        assert log_likelihood(model, X) == pytest.approx(expected, rel=1e-12)

    def test_far_points_do_not_underflow(self):
        ll = log_likelihood(standard_model(), [[1e3, 0.0]])
        assert np.isfinite(ll)
        assert ll == pytest.approx(math.log(1 / (2 * math.pi)) - 5e5)


class TestFit:
    def test_single_component_is_sample_statistics(self):
        X = np.random.default_rng(3).normal([0.2, -0.1], [0.3, 0.1], size=(150, 2))
        model, report = fit_gmm(X, k=1, seed=0)
        np.testing.assert_allclose(model.means[0], X.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(model.covariances[0], np.cov(X.T, bias=True), atol=1e-12)
        assert model.weights[0] == pytest.approx(1.0)
        assert report.converged

    def test_two_clusters_recovered(self):
        a, b = two_clusters()
        model, report = fit_gmm(np.vstack([a, b]), k=2, seed=0)
        order = np.argsort(model.means[:, 0])
        means, weights = model.means[order], model.weights[order]
        # oracle: each fitted component sits on its cluster's own sample statistics
        np.testing.assert_allclose(means[0], a.mean(axis=0), atol=0.05)
        np.testing.assert_allclose(means[1], b.mean(axis=0), atol=0.05)
        assert np.linalg.norm(means[0] - [-5, 0]) < 0.3
        assert np.linalg.norm(means[1] - [5, 0]) < 0.3
        np.testing.assert_allclose(weights, 0.5, atol=0.05)
        assert report.converged

    def test_letter_session_gives_ten_components(self):
        pooled, _ = pool_demonstrations(demo_letters(0), 100)
        model, _ = fit_gmm(pooled, k=10, seed=0)
        assert model.k == 10
        # means stay on the letter, near some demonstration point
        d = np.sqrt(((model.means[:, None] - pooled[None]) ** 2).sum(-1)).min(axis=1)
        assert d.max() < 0.05

    def test_k_exceeds_points(self):
        with pytest.raises(GmmError, match="exceeds"):
            fit_gmm([[0, 0], [1, 1]], k=3)

    def test_identical_points(self):
        with pytest.raises(GmmError, match="degenerate"):
            fit_gmm([[0.5, 0.5]] * 10, k=2)

    def test_deterministic(self):
        X = np.random.default_rng(5).normal(size=(300, 2))
        m1, r1 = fit_gmm(X, k=4, seed=11)
        m2, r2 = fit_gmm(X, k=4, seed=11)
        assert m1.weights.tobytes() == m2.weights.tobytes()
        assert m1.means.tobytes() == m2.means.tobytes()
        assert m1.covariances.tobytes() == m2.covariances.tobytes()
        assert r1.log_likelihood_trace == r2.log_likelihood_trace

    def test_duplicated_data_has_same_fixed_point(self):
        X = np.random.default_rng(9).normal(size=(120, 2))
        m1, _ = fit_gmm(X, k=3, seed=2)
        m9, _ = fit_gmm(np.tile(X, (9, 1)), k=3, seed=2)
        np.testing.assert_allclose(m9.means, m1.means, atol=1e-10)
        np.testing.assert_allclose(m9.weights, m1.weights, atol=1e-10)

    def test_max_iter_respected(self):
        X = np.random.default_rng(0).normal(size=(200, 2))
        _, report = fit_gmm(X, k=5, seed=0, max_iter=3, tol=1e-300)
        assert report.iterations_run == 3
        assert not report.converged
        assert len(report.log_likelihood_trace) == 4

    def test_dwell_duplicates_hit_variance_floor(self):
        # a component can collapse onto a cluster of near-identical dwell samples
        rng = np.random.default_rng(4)
        X = np.vstack([np.repeat([[0.3, 0.3]], 30, axis=0), rng.uniform(-1, 1, size=(60, 2))])
        floor = variance_floor(X)
        seen = []
        fit_gmm(X, k=6, seed=1, on_iteration=lambda m, r: seen.append(m))
        for m in seen:
            assert np.linalg.eigvalsh(m.covariances).min() >= floor * (1 - 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 8))
def test_em_invariants_on_random_data(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rng.integers(k + 5, 120), 2)) * rng.uniform(0.1, 3.0, size=2)
    floor = variance_floor(X)
    resp_sums, weight_sums, min_eigs = [], [], []

    def hook(model, resp):
        resp_sums.append(np.abs(resp.sum(axis=1) - 1).max())
        weight_sums.append(abs(model.weights.sum() - 1))
        min_eigs.append(np.linalg.eigvalsh(model.covariances).min())

    model, report = fit_gmm(X, k=k, seed=seed, on_iteration=hook)
    trace = np.array(report.log_likelihood_trace)
    assert np.all(np.diff(trace) >= -1e-9)
    assert max(resp_sums) <= 1e-12
    assert max(weight_sums) <= 1e-9
    assert min(min_eigs) >= floor * (1 - 1e-9)
    assert np.all(model.weights > 0) and np.all(model.weights <= 1)


def test_responsibilities_hook():
    X = np.random.default_rng(0).normal(size=(50, 2))
    model, _ = fit_gmm(X, k=3, seed=0)
    r = responsibilities(model, X)
    assert r.shape == (50, 3)
    np.testing.assert_allclose(r.sum(axis=1), 1.0, atol=1e-12)


class TestExtractCurve:
    def line_reference(self):
        return Trajectory(np.column_stack([np.linspace(0, 1, 11), np.zeros(11)]))

    def model_with_means(self, means):
        k = len(means)
        return GmmModel(np.full(k, 1 / k), means, np.repeat(np.eye(2)[None] * 0.01, k, axis=0))

    def test_reorders_by_arc_fraction(self):
        curve = extract_generalized_curve(
            self.model_with_means([[0.9, 0.0], [0.1, 0.0], [0.5, 0.0]]), self.line_reference())
        np.testing.assert_array_equal(curve.points[:, 0], [0.1, 0.5, 0.9])

    def test_single_component_rejected(self):
        with pytest.raises(GmmError, match="degenerate curve"):
            extract_generalized_curve(self.model_with_means([[0.5, 0.0]]), self.line_reference())

    @settings(max_examples=40)
    @given(st.integers(0, 10**6), st.integers(2, 12))
    def test_permutation_invariant(self, seed, k):
        rng = np.random.default_rng(seed)
        # quantized means force ties on the nearest reference sample
        means = np.round(rng.uniform(0, 1, size=(k, 2)), 1)
        ref = Trajectory(np.column_stack([np.linspace(0, 1, 6), np.linspace(0, 1, 6) ** 2]))
        base = extract_generalized_curve(self.model_with_means(means), ref).points
        perm = rng.permutation(k)
        other = extract_generalized_curve(self.model_with_means(means[perm]), ref).points
        np.testing.assert_array_equal(base, other)


class TestGeneralizeLetter:
    def test_straight_stroke_k2(self):
        stroke = Trajectory(np.column_stack([np.linspace(0, 1, 200), np.zeros(200)]))
        curve = generalize_letter([stroke], k=2, seed=0)
        assert len(curve) == 2
        # optimal two-piece split of a uniform segment: centers at 1/4 and 3/4
        np.testing.assert_allclose(curve.points[:, 0], [0.25, 0.75], atol=0.02)
        np.testing.assert_allclose(curve.points[:, 1], 0.0, atol=1e-9)

    def test_reversed_stroke_is_ordered_start_to_end(self):
        stroke = Trajectory(np.column_stack([np.linspace(1, 0, 200), np.zeros(200)]))
        curve = generalize_letter([stroke], k=2, seed=0)
        assert curve.points[0, 0] > curve.points[1, 0]

    def test_identical_demonstrations(self):
        letter = demo_letters(3, 1)[0]
        one = generalize_letter([letter], k=10, seed=4)
        nine = generalize_letter([letter] * 9, k=10, seed=4)
        np.testing.assert_allclose(nine.points, one.points, atol=1e-9)

    def test_nine_letters(self):
        letters = demo_letters(0)
        curve = generalize_letter(letters, k=10, seed=0)
        assert len(curve) == 10
        ref = resample_by_arclength(letters[0], 100).points
        # starts near the stroke start and ends near the stroke end
        assert np.linalg.norm(curve.points[0] - ref[0]) < np.linalg.norm(curve.points[0] - ref[-1])
        assert np.linalg.norm(curve.points[-1] - ref[-1]) < np.linalg.norm(curve.points[-1] - ref[0])

    def test_no_demonstrations(self):
        with pytest.raises(GmmError):
            generalize_letter([], k=2)


def test_serialization_round_trip():
    X = np.random.default_rng(2).normal(size=(80, 2))
    model, _ = fit_gmm(X, k=3, seed=0)
    text = dump_gmm(model)
    again = load_gmm(text)
    assert again == model
    assert dump_gmm(again) == text


def test_load_rejects_other_formats():
    with pytest.raises(GmmError):
        load_gmm('{"format": "something", "version": 1}')
    with pytest.raises(GmmError):
        load_gmm('{"format": "glyphtrace.gmm", "version": 99}')
