"""Recorded robot trajectories: parsing, serialization and basic geometry.

Every stage of the pipeline passes :class:`Trajectory` objects around.  A
trajectory is an ordered run of 2D or 3D workspace points sampled at a fixed
rate; timestamps are implicit (``index / sample_rate_hz``).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, TextIO

import numpy as np

DEFAULT_SAMPLE_RATE_HZ = 10.0


class TrajectoryError(ValueError):
    """Raised for malformed or geometrically degenerate trajectory data."""


@dataclass(frozen=True)
class Trajectory:
    """Ordered sequence of 2D or 3D points sampled at ``sample_rate_hz``.

    ``points`` is stored as a read-only ``(n, dims)`` float array.  ``dotted``
    marks trajectories meant to be rendered one dot per sample.
    """

    points: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    label: str | None = None
    dotted: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise TrajectoryError(f"points must have shape (n, 2) or (n, 3), got {pts.shape}")
        if len(pts) < 2:
            raise TrajectoryError("insufficient points: a trajectory needs at least 2")
        if not np.all(np.isfinite(pts)):
            raise TrajectoryError("trajectory contains non-finite coordinates")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise TrajectoryError("sample_rate_hz must be positive")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def dims(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.points)) / self.sample_rate_hz

    def with_points(self, points) -> Trajectory:
        return replace(self, points=points)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
            and self.sample_rate_hz == other.sample_rate_hz
            and self.label == other.label
            and self.dotted == other.dotted
        )

    __hash__ = None


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned 2D box, ``min`` and ``max`` as ``(x, y)`` tuples."""

    min: tuple[float, float]
    max: tuple[float, float]

    def __post_init__(self):
        if self.min[0] > self.max[0] or self.min[1] > self.max[1]:
            raise ValueError(f"invalid bounding box {self.min} > {self.max}")

    @property
    def width(self) -> float:
        return self.max[0] - self.min[0]

    @property
    def height(self) -> float:
        return self.max[1] - self.min[1]

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def padded(self, margin: float) -> BoundingBox:
        return BoundingBox(
            (self.min[0] - margin, self.min[1] - margin),
            (self.max[0] + margin, self.max[1] + margin),
        )


def parse_trajectory(source: TextIO | str, dims: int = 2, *,
                     sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
                     label: str | None = None) -> Trajectory:
    """Parse comma separated coordinate text, one point per line.

    Blank lines and ``#`` comments are skipped.  The first non-comment line
    may be a header (it is skipped when it contains no parseable number).
    Repeated samples are kept as-is.
    """
    if dims not in (2, 3):
        raise ValueError("dims must be 2 or 3")
    if isinstance(source, str):
        source = io.StringIO(source)

    rows = []
    seen_content = False
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        try:
            values = [float(f) for f in fields]
        except ValueError:
            if not seen_content and not any(_is_number(f) for f in fields):
                seen_content = True
                continue
            raise TrajectoryError(f"line {lineno}: malformed coordinates {line!r}") from None
        seen_content = True
        if len(values) != dims:
            raise TrajectoryError(
                f"line {lineno}: expected {dims} values, got {len(values)} in {line!r}")
        if not all(math.isfinite(v) for v in values):
            raise TrajectoryError(f"line {lineno}: non-finite value in {line!r}")
        rows.append(values)

    if len(rows) < 2:
        raise TrajectoryError(f"insufficient points: found {len(rows)}, need at least 2")
    return Trajectory(np.array(rows, dtype=float), sample_rate_hz=sample_rate_hz, label=label)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def format_trajectory(t: Trajectory) -> str:
    """Serialize to the same text layout :func:`parse_trajectory` reads.

    Floats are written with ``repr`` so a parse/format/parse cycle is exact.
    """
    return "".join(", ".join(repr(float(v)) for v in row) + "\n" for row in t.points)


def read_trajectory(path, dims: int = 2, **kwargs) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        return parse_trajectory(fh, dims, **kwargs)


def write_trajectory(t: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trajectory(t))


def cumulative_arclength(points: np.ndarray) -> np.ndarray:
    """Arc length from the first point to each point along the polyline."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample_by_arclength(t: Trajectory, m: int) -> Trajectory:
    """Return ``m`` points equally spaced in arc length along ``t``.

    Uses linear interpolation between samples.  Endpoints are copied exactly,
    and dwell points (repeated samples) contribute zero length so they
    collapse.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    pts = t.points
    s = cumulative_arclength(pts)
    total = s[-1]
    if total <= 0.0:
        raise TrajectoryError("zero-length trajectory: all points are identical")

    targets = np.linspace(0.0, total, m)
    # index of the segment each target falls in; searchsorted skips zero-length segments
    idx = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, len(pts) - 2)
    seg_len = s[idx + 1] - s[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(seg_len > 0, (targets - s[idx]) / seg_len, 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    out = pts[idx] + frac[:, None] * (pts[idx + 1] - pts[idx])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return t.with_points(out)


def bounding_box(t: Trajectory) -> BoundingBox:
    lo = t.points[:, :2].min(axis=0)
    hi = t.points[:, :2].max(axis=0)
    return BoundingBox((float(lo[0]), float(lo[1])), (float(hi[0]), float(hi[1])))


def bounding_box_of(points: Iterable[np.ndarray]) -> BoundingBox:
    stacked = np.vstack([np.asarray(p)[:, :2] for p in points])
    lo, hi = stacked.min(axis=0), stacked.max(axis=0)
    return BoundingBox((float(lo[0]), float(lo[1])), (float(hi[0]), float(hi[1])))


def check_unit_range(t: Trajectory) -> bool:
    """True iff every coordinate lies in the closed interval [-1, 1]."""
    return bool(np.all(np.abs(t.points) <= 1.0))


def normalize_to_unit(t: Trajectory) -> Trajectory:
    """Center the bounding box on the origin and scale uniformly into [-1, 1].

    The larger half-extent maps to 1, so the aspect ratio is preserved.
    """
    pts = t.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    half = (hi - lo) / 2.0
    scale = half.max()
    if scale <= 0.0:
        raise TrajectoryError("cannot normalize a degenerate single-point trajectory")
    # offsets from the low corner keep the extremes exact, so they land on +-1
    out = ((pts - lo) - half) / scale
    np.clip(out, -1.0, 1.0, out=out)
    return t.with_points(out)


def collapse_duplicates(points: np.ndarray) -> np.ndarray:
    """Drop consecutive repeated samples, keeping the first of each run."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return pts
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    return pts[keep]
