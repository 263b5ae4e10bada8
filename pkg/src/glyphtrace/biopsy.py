"""Recorded 3D tool path -> continuous curve -> 2D projection -> simplified polyline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .trajectory import Trajectory, bounding_box, collapse_duplicates, cumulative_arclength

PRINCIPAL_PLANES = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}
DEFAULT_EPSILON_FRACTION = 0.01
COLLINEAR_RTOL = 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SplineCurve:
    """Natural cubic spline through 3D knots, parameterized by chord length."""

    knots: np.ndarray       # (n, 3) distinct consecutive points
    parameters: np.ndarray  # (n,) cumulative chord length, starts at 0
    spline: CubicSpline

    @property
    def total_length(self) -> float:
        return float(self.parameters[-1])

    def __call__(self, s) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.total_length)
        return self.spline(s)


def interpolate_spline(t: Trajectory) -> SplineCurve:
    """Interpolating natural cubic spline after dropping consecutive repeats."""
    if t.dims != 3:
        raise GeometryError("spline interpolation expects a 3D trajectory")
    knots = collapse_duplicates(t.points)
    if len(knots) < 4:
        raise GeometryError(f"need at least 4 distinct points, got {len(knots)}")
    s = cumulative_arclength(knots)
    return SplineCurve(knots, s, CubicSpline(s, knots, axis=0, bc_type="natural"))


def sample_curve(c: SplineCurve, m: int, sample_rate_hz: float = 10.0) -> Trajectory:
    """``m`` samples at uniform parameter spacing, endpoints included."""
    if m < 2:
        raise ValueError("m must be at least 2")
    s = np.linspace(0.0, c.total_length, m)
    pts = c(s)
    pts[0] = c.knots[0]
    pts[-1] = c.knots[-1]
    return Trajectory(pts, sample_rate_hz=sample_rate_hz)


@dataclass(frozen=True)
class ProjectionPlane:
    """Either a named principal plane (``xy``, ``xz``, ``yz``) or ``fit``."""

    name: str = "fit"

    def __post_init__(self):
        if self.name not in PRINCIPAL_PLANES and self.name != "fit":
            raise ValueError(f"unknown plane {self.name!r}; use xy, xz, yz or fit")


def fit_plane(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Least-squares plane through ``points``.

    Returns ``(origin, u, v, normal)``.  ``u`` follows the start-to-end chord
    projected into the plane (or the main principal direction if that chord
    is too short); ``normal`` is signed so its largest component is positive
    and ``(u, v, normal)`` is right handed.
    """
    pts = np.asarray(points, dtype=float)
    origin = pts.mean(axis=0)
    _, sv, vt = np.linalg.svd(pts - origin, full_matrices=False)
    if len(sv) < 2 or sv[1] <= COLLINEAR_RTOL * max(sv[0], 1e-300):
        raise GeometryError("collinear points: no unique best-fit plane")
    normal = vt[2] if len(vt) > 2 else np.cross(vt[0], vt[1])
    if normal[np.argmax(np.abs(normal))] < 0:
        normal = -normal

    chord = pts[-1] - pts[0]
    chord = chord - (chord @ normal) * normal
    scale = sv[0] / np.sqrt(len(pts))
    if np.linalg.norm(chord) > 1e-6 * scale:
        u = chord / np.linalg.norm(chord)
    else:
        u = vt[0] - (vt[0] @ normal) * normal
        u /= np.linalg.norm(u)
        if u[np.argmax(np.abs(u))] < 0:
            u = -u
    v = np.cross(normal, u)
    return origin, u, v, normal


def project(t: Trajectory, plane: ProjectionPlane | str = "fit") -> Trajectory:
    """Orthogonal projection of a 3D trajectory to 2D coordinates."""
    if isinstance(plane, str):
        plane = ProjectionPlane(plane)
    if t.dims != 3:
        raise GeometryError("projection expects a 3D trajectory")
    pts = t.points
    if plane.name in PRINCIPAL_PLANES:
        out = pts[:, list(PRINCIPAL_PLANES[plane.name])]
    else:
        origin, u, v, _ = fit_plane(pts)
        rel = pts - origin
        out = np.column_stack([rel @ u, rel @ v])
    return Trajectory(out, sample_rate_hz=t.sample_rate_hz, label=t.label)


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each row of ``p`` to the closed segment ``ab``."""
    ab = b - a
    denom = ab @ ab
    if denom == 0.0:
        return np.linalg.norm(p - a, axis=-1)
    w = np.clip(((p - a) @ ab) / denom, 0.0, 1.0)
    return np.linalg.norm(p - (a + w[..., None] * ab), axis=-1)


def rdp_indices(points: np.ndarray, epsilon: float) -> np.ndarray:
    """Indices kept by Ramer-Douglas-Peucker with segment distances."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        d = point_segment_distance(pts[lo + 1:hi], pts[lo], pts[hi])
        j = int(np.argmax(d))
        if d[j] > epsilon:
            mid = lo + 1 + j
            keep[mid] = True
            stack.append((mid, hi))
            stack.append((lo, mid))
    return np.flatnonzero(keep)


def simplify_rdp(t: Trajectory, epsilon: float) -> Trajectory:
    """Drop points that stay within ``epsilon`` of the simplified polyline.

    ``epsilon == 0`` returns the input unchanged.
    """
    if epsilon < 0 or not np.isfinite(epsilon):
        raise ValueError(f"epsilon must be a non-negative finite number, got {epsilon}")
    if epsilon == 0:
        return t
    return t.with_points(t.points[rdp_indices(t.points, epsilon)])


def default_epsilon(t: Trajectory) -> float:
    """One percent of the bounding-box diagonal."""
    return DEFAULT_EPSILON_FRACTION * bounding_box(t).diagonal


@dataclass(frozen=True)
class BiopsyStages:
    curve: Trajectory       # densely sampled 3D spline
    projected: Trajectory   # 2D
    simplified: Trajectory  # 2D subsequence of ``projected``
    epsilon: float


def run_biopsy_pipeline(t: Trajectory, plane: ProjectionPlane | str = "fit",
                        epsilon: float | None = None, samples: int | None = None,
                        ) -> BiopsyStages:
    """Interpolate, sample, project and simplify a recorded 3D path.

    ``samples`` defaults to four times the number of distinct knots.
    ``epsilon=None`` uses :func:`default_epsilon` on the projection.
    """
    spline = interpolate_spline(t)
    curve = sample_curve(spline, samples or 4 * len(spline.knots), t.sample_rate_hz)
    flat = project(curve, plane)
    eps = default_epsilon(flat) if epsilon is None else float(epsilon)
    return BiopsyStages(curve, flat, simplify_rdp(flat, eps), eps)
