import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glyphtrace.biopsy import (
    GeometryError,
    ProjectionPlane,
    default_epsilon,
    fit_plane,
    interpolate_spline,
    project,
    rdp_indices,
    run_biopsy_pipeline,
    sample_curve,
    simplify_rdp,
)
from glyphtrace.demo import make_biopsy_path, make_helix
from glyphtrace.trajectory import Trajectory

from oracles import polyline_distance


def random_walk_3d(seed, n=12):
    rng = np.random.default_rng(seed)
    return Trajectory(np.cumsum(rng.normal(size=(n, 3)), axis=0))


class TestSpline:
    def test_knots_reproduced(self):
        helix = make_helix()
        c = interpolate_spline(helix)
        np.testing.assert_allclose(c(c.parameters), helix.points, atol=1e-9)

    @settings(max_examples=30)
    @given(st.integers(0, 10**6), st.integers(4, 30))
    def test_random_knots_reproduced(self, seed, n):
        t = random_walk_3d(seed, n)
        c = interpolate_spline(t)
        np.testing.assert_allclose(c(c.parameters), t.points, atol=1e-9)

    def test_collinear_knots_give_a_line(self):
        s = np.array([0.0, 0.1, 0.5, 0.6, 1.4, 2.0])
        direction = np.array([1.0, -2.0, 0.5]) / np.linalg.norm([1.0, -2.0, 0.5])
        t = Trajectory(np.array([0.2, 0.1, -0.3]) + s[:, None] * direction)
        pts = sample_curve(interpolate_spline(t), 500).points
        rel = pts - t.points[0]
        off_line = rel - (rel @ direction)[:, None] * direction
        assert np.abs(off_line).max() < 1e-9

    def test_endpoints_exact(self):
        t = make_biopsy_path(np.random.default_rng(0))
        out = sample_curve(interpolate_spline(t), 77)
        assert np.array_equal(out.points[0], t.points[0])
        assert np.array_equal(out.points[-1], t.points[-1])

    def test_dwell_repeats_are_collapsed(self):
        base = random_walk_3d(1, 6).points
        doubled = np.repeat(base, 3, axis=0)
        a = interpolate_spline(Trajectory(base))
        b = interpolate_spline(Trajectory(doubled))
        np.testing.assert_array_equal(a.knots, b.knots)

    def test_dense_sampling_converges(self):
        c = interpolate_spline(make_helix())
        coarse = sample_curve(c, 200).points
        fine = sample_curve(c, 400).points
        # every coarse sample lies on the fine polyline, up to chord error
        assert max(polyline_distance(p, fine) for p in coarse) < 1e-3

    def test_too_few_points(self):
        with pytest.raises(GeometryError, match="at least 4"):
            interpolate_spline(Trajectory([[0, 0, 0], [1, 0, 0], [1, 0, 0], [2, 1, 0]]))

    def test_needs_three_dimensions(self):
        with pytest.raises(GeometryError):
            interpolate_spline(Trajectory([[0, 0], [1, 0], [2, 1], [3, 3]]))


class TestProjection:
    def test_principal_plane_drops_coordinate(self):
        t = random_walk_3d(2)
        np.testing.assert_array_equal(project(t, "xy").points, t.points[:, :2])
        np.testing.assert_array_equal(project(t, "xz").points, t.points[:, [0, 2]])
        np.testing.assert_array_equal(project(t, "yz").points, t.points[:, 1:])

    def test_unknown_plane(self):
        with pytest.raises(ValueError):
            ProjectionPlane("zx")

    def test_planar_path_is_isometric(self):
        rng = np.random.default_rng(5)
        xy = rng.uniform(-1, 1, size=(40, 2))
        t = Trajectory(np.column_stack([xy, np.full(40, 5.0)]))
        out = project(t, "fit").points
        # pairwise distances survive the change of frame
        d_in = np.linalg.norm(xy[:, None] - xy[None], axis=-1)
        d_out = np.linalg.norm(out[:, None] - out[None], axis=-1)
        np.testing.assert_allclose(d_out, d_in, atol=1e-9)

    def test_tilted_plane_recovered(self):
        rng = np.random.default_rng(6)
        normal = np.array([1.0, 2.0, 3.0]) / np.linalg.norm([1.0, 2.0, 3.0])
        a = np.cross(normal, [1.0, 0.0, 0.0])
        a /= np.linalg.norm(a)
        b = np.cross(normal, a)
        coef = rng.uniform(-1, 1, size=(30, 2))
        pts = coef[:, :1] * a + coef[:, 1:] * b + [0.1, 0.2, 0.3]
        _, u, v, n = fit_plane(pts)
        np.testing.assert_allclose(n, normal, atol=1e-9)
        np.testing.assert_allclose([u @ v, u @ n, v @ n], 0.0, atol=1e-12)
        assert np.dot(np.cross(u, v), n) == pytest.approx(1.0)

    def test_helix_projects_to_circle(self):
        flat = project(make_helix(n=240, radius=0.3), "fit").points
        # algebraic circle fit: x^2 + y^2 + D x + E y + F = 0
        A = np.column_stack([flat, np.ones(len(flat))])
        D, E, F = np.linalg.lstsq(A, -(flat ** 2).sum(axis=1), rcond=None)[0]
        radius = np.sqrt(D ** 2 / 4 + E ** 2 / 4 - F)
        assert radius == pytest.approx(0.3, rel=0.01)

    def test_chord_sets_horizontal_axis(self):
        t = make_biopsy_path(np.random.default_rng(3))
        out = project(t, "fit").points
        chord = out[-1] - out[0]
        assert chord[0] >= 0 and abs(chord[1]) < 1e-9

    def test_collinear_input_has_no_plane(self):
        t = Trajectory(np.outer(np.linspace(0, 1, 20), [1.0, 1.0, 1.0]))
        with pytest.raises(GeometryError, match="collinear"):
            project(t, "fit")


def brute_force_check(points, kept, eps):
    """Each dropped point must lie within ``eps`` of the kept polyline."""
    simplified = points[kept]
    dropped = np.setdiff1d(np.arange(len(points)), kept)
    return all(polyline_distance(points[i], simplified) <= eps + 1e-12 for i in dropped)


class TestRdp:
    def test_collinear_reduces_to_endpoints(self):
        pts = np.column_stack([np.linspace(0, 1, 100), np.linspace(0, 2, 100)])
        out = simplify_rdp(Trajectory(pts), 1e-6)
        np.testing.assert_array_equal(out.points, pts[[0, -1]])

    def test_zero_epsilon_is_identity(self):
        t = Trajectory(np.random.default_rng(0).uniform(size=(30, 2)))
        assert simplify_rdp(t, 0.0) == t

    def test_negative_epsilon(self):
        with pytest.raises(ValueError):
            simplify_rdp(Trajectory([[0, 0], [1, 1]]), -0.1)

    def test_square_keeps_corners(self):
        # dense open square walked from (0, 0) counter-clockwise back to (0, 0.01)
        side = np.linspace(0, 1, 101)[:-1]
        pts = np.vstack([
            np.column_stack([side, np.zeros(100)]),
            np.column_stack([np.ones(100), side]),
            np.column_stack([1 - side, np.ones(100)]),
            np.column_stack([np.zeros(100), 1 - side]),
        ])
        kept = rdp_indices(pts, 0.01)
        np.testing.assert_allclose(pts[kept], [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0.01]], atol=1e-15)
        assert brute_force_check(pts, kept, 0.01)

    def test_spike_is_kept(self):
        pts = np.array([[0, 0], [1, 0], [2, 0], [2.5, 3], [3, 0], [4, 0]], dtype=float)
        kept = rdp_indices(pts, 0.5)
        assert 3 in kept

    def test_segment_distance_not_line_distance(self):
        # the middle point is on the line through the endpoints but far outside the segment
        pts = np.array([[0.0, 0.0], [3.0, 0.0], [1.0, 0.0]])
        np.testing.assert_array_equal(rdp_indices(pts, 0.5), [0, 1, 2])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6), st.integers(2, 80), st.floats(1e-4, 0.5))
    def test_random_polylines(self, seed, n, eps):
        pts = np.cumsum(np.random.default_rng(seed).normal(0, 0.1, size=(n, 2)), axis=0)
        kept = rdp_indices(pts, eps)
        assert kept[0] == 0 and kept[-1] == n - 1
        assert np.all(np.diff(kept) > 0)
        assert brute_force_check(pts, kept, eps)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_monotone_in_epsilon(self, seed):
        pts = np.cumsum(np.random.default_rng(seed).normal(size=(60, 2)), axis=0)
        counts = [len(rdp_indices(pts, e)) for e in np.geomspace(1e-4, 10, 25)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))


class TestPipeline:
    def test_stages(self):
        t = make_biopsy_path(np.random.default_rng(0))
        stages = run_biopsy_pipeline(t)
        assert stages.curve.dims == 3 and stages.projected.dims == 2
        assert len(stages.curve) == len(stages.projected)
        assert stages.epsilon == pytest.approx(default_epsilon(stages.projected))
        # simplified points are a subsequence of the projection
        idx = [np.flatnonzero((stages.projected.points == p).all(axis=1))[0]
               for p in stages.simplified.points]
        assert idx == sorted(idx)
        assert len(stages.simplified) < len(stages.projected)

    def test_explicit_samples_and_plane(self):
        t = make_helix()
        stages = run_biopsy_pipeline(t, plane="xy", epsilon=0.0, samples=50)
        assert len(stages.curve) == 50
        assert stages.simplified == stages.projected

    def test_deterministic(self):
        t = make_biopsy_path(np.random.default_rng(9))
        a = run_biopsy_pipeline(t)
        b = run_biopsy_pipeline(t)
        assert a.simplified.points.tobytes() == b.simplified.points.tobytes()
        assert a.curve.points.tobytes() == b.curve.points.tobytes()
