"""Cubic Bezier vectorization of polylines and SVG output."""

from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .trajectory import BoundingBox, Trajectory, bounding_box_of, collapse_duplicates

DEFAULT_TOLERANCE_FRACTION = 0.005
# control point offset for a quarter circle
KAPPA = 4.0 / 3.0 * (math.sqrt(2.0) - 1.0)
SVG_NS = "http://www.w3.org/2000/svg"
SVG_LONG_SIDE_PX = 1000


class VectorizeError(ValueError):
    pass


@dataclass(frozen=True)
class PathStyle:
    stroke_width: float = 0.01
    dotted: bool = False
    dot_radius: float = 0.01


@dataclass(frozen=True)
class VectorPath:
    """A list of cubic Bezier subpaths, each an ``(s, 4, 2)`` control point array.

    Within a subpath every segment starts where the previous one ends.
    Dotted paths hold one closed four-segment subpath per dot.
    """

    subpaths: tuple[np.ndarray, ...]
    style: PathStyle = PathStyle()

    def __post_init__(self):
        subs = []
        for sp in self.subpaths:
            arr = np.array(sp, dtype=float)
            if arr.ndim != 3 or arr.shape[1:] != (4, 2) or len(arr) == 0:
                raise VectorizeError(f"subpath must have shape (s, 4, 2), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise VectorizeError("non-finite control point")
            if not np.array_equal(arr[1:, 0], arr[:-1, 3]):
                raise VectorizeError("segments are not C0 continuous")
            arr.flags.writeable = False
            subs.append(arr)
        object.__setattr__(self, "subpaths", tuple(subs))

    @property
    def segments(self) -> np.ndarray:
        return np.concatenate(self.subpaths) if self.subpaths else np.empty((0, 4, 2))

    def control_points(self) -> np.ndarray:
        return self.segments.reshape(-1, 2)


def bezier_point(ctrl: np.ndarray, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)[..., None]
    mu = 1.0 - u
    return (mu ** 3 * ctrl[0] + 3 * mu ** 2 * u * ctrl[1]
            + 3 * mu * u ** 2 * ctrl[2] + u ** 3 * ctrl[3])


def _bezier_d1(ctrl, u):
    u = np.asarray(u, dtype=float)[..., None]
    mu = 1.0 - u
    return 3 * (mu ** 2 * (ctrl[1] - ctrl[0]) + 2 * mu * u * (ctrl[2] - ctrl[1])
                + u ** 2 * (ctrl[3] - ctrl[2]))


def _bezier_d2(ctrl, u):
    u = np.asarray(u, dtype=float)[..., None]
    return 6 * ((1.0 - u) * (ctrl[2] - 2 * ctrl[1] + ctrl[0]) + u * (ctrl[3] - 2 * ctrl[2] + ctrl[1]))


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _chord_params(pts: np.ndarray) -> np.ndarray:
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    return s / s[-1]


def _generate_bezier(pts, u, t_left, t_right) -> np.ndarray:
    first, last = pts[0], pts[-1]
    mu = 1.0 - u
    a1 = (3 * mu ** 2 * u)[:, None] * t_left
    a2 = (3 * mu * u ** 2)[:, None] * t_right
    c = np.array([[np.sum(a1 * a1), np.sum(a1 * a2)], [np.sum(a1 * a2), np.sum(a2 * a2)]])
    base = (mu ** 3 + 3 * mu ** 2 * u)[:, None] * first + (3 * mu * u ** 2 + u ** 3)[:, None] * last
    tmp = pts - base
    x = np.array([np.sum(a1 * tmp), np.sum(a2 * tmp)])

    det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    alpha_l = (x[0] * c[1, 1] - x[1] * c[0, 1]) / det if det != 0 else 0.0
    alpha_r = (c[0, 0] * x[1] - c[1, 0] * x[0]) / det if det != 0 else 0.0

    seg_len = np.linalg.norm(last - first)
    eps = 1e-6 * seg_len
    if alpha_l < eps or alpha_r < eps:
        # Wu/Barsky fallback
        alpha_l = alpha_r = seg_len / 3.0
    return np.array([first, first + alpha_l * t_left, last + alpha_r * t_right, last])


def _reparameterize(ctrl, pts, u) -> np.ndarray:
    d = bezier_point(ctrl, u) - pts
    d1 = _bezier_d1(ctrl, u)
    d2 = _bezier_d2(ctrl, u)
    num = np.sum(d * d1, axis=1)
    den = np.sum(d1 * d1 + d * d2, axis=1)
    step = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    return np.clip(u - step, 0.0, 1.0)


def _max_error(ctrl, pts, u) -> tuple[float, int]:
    dist = np.linalg.norm(bezier_point(ctrl, u) - pts, axis=1)
    inner = dist[1:-1]
    if len(inner) == 0:
        return 0.0, len(pts) // 2
    j = int(np.argmax(inner))
    return float(inner[j]), j + 1


def _fit_cubic(pts, t_left, t_right, tolerance) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    stack = [(pts, t_left, t_right)]
    while stack:
        p, tl, tr = stack.pop()
        if len(p) == 2:
            d = np.linalg.norm(p[1] - p[0]) / 3.0
            out.append(np.array([p[0], p[0] + tl * d, p[1] + tr * d, p[1]]))
            continue
        u = _chord_params(p)
        ctrl = _generate_bezier(p, u, tl, tr)
        err, split = _max_error(ctrl, p, u)
        if err > tolerance and err < 4.0 * tolerance:
            for _ in range(20):
                u = _reparameterize(ctrl, p, u)
                ctrl = _generate_bezier(p, u, tl, tr)
                err, split = _max_error(ctrl, p, u)
                if err <= tolerance:
                    break
        if err <= tolerance:
            out.append(ctrl)
            continue
        center = _unit(p[split - 1] - p[split + 1])
        if not np.any(center):
            center = _unit(p[split - 1] - p[split])
        # right half first so the left half is popped next
        stack.append((p[split:], -center, tr))
        stack.append((p[:split + 1], tl, center))
    return out


def fit_bezier(t: Trajectory | np.ndarray, tolerance: float | None = None,
               style: PathStyle = PathStyle()) -> VectorPath:
    """Piecewise cubic least-squares fit with recursive subdivision.

    Each input point ends up within ``tolerance`` of the curve at its fitted
    parameter.  ``tolerance=None`` uses 0.5% of the bounding-box diagonal.
    Consecutive repeated points are dropped before fitting.
    """
    raw = t.points if isinstance(t, Trajectory) else np.asarray(t, dtype=float)
    pts = collapse_duplicates(raw[:, :2])
    if len(pts) < 2:
        raise VectorizeError("degenerate input: all points are identical")
    if tolerance is None:
        tolerance = default_tolerance(pts)
    if not tolerance > 0:
        raise VectorizeError("tolerance must be positive")
    t_left = _unit(pts[1] - pts[0])
    t_right = _unit(pts[-2] - pts[-1])
    segments = _fit_cubic(pts, t_left, t_right, tolerance)
    # pin shared endpoints so continuity is exact
    for a, b in zip(segments, segments[1:]):
        b[0] = a[3]
    return VectorPath((np.array(segments),), style)


def default_tolerance(points: np.ndarray) -> float:
    return DEFAULT_TOLERANCE_FRACTION * bounding_box_of([points]).diagonal


def polyline_path(t: Trajectory | np.ndarray, style: PathStyle = PathStyle()) -> VectorPath:
    """Straight segments through every point, as degenerate cubics."""
    raw = t.points if isinstance(t, Trajectory) else np.asarray(t, dtype=float)
    pts = raw[:, :2]
    a, b = pts[:-1], pts[1:]
    segs = np.stack([a, a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0, b], axis=1)
    segs[1:, 0] = segs[:-1, 3]
    return VectorPath((segs,), style)


def circle_segments(center, radius: float) -> np.ndarray:
    """Four-arc Bezier approximation of a circle, counter-clockwise from angle 0."""
    cx, cy = center
    k = KAPPA * radius
    r = radius
    return np.array([
        [[cx + r, cy], [cx + r, cy + k], [cx + k, cy + r], [cx, cy + r]],
        [[cx, cy + r], [cx - k, cy + r], [cx - r, cy + k], [cx - r, cy]],
        [[cx - r, cy], [cx - r, cy - k], [cx - k, cy - r], [cx, cy - r]],
        [[cx, cy - r], [cx + k, cy - r], [cx + r, cy - k], [cx + r, cy]],
    ])


def to_dotted(t: Trajectory | np.ndarray, dot_radius: float = 0.01) -> VectorPath:
    """One filled circle per point, no connecting strokes."""
    if not dot_radius > 0:
        raise VectorizeError("dot radius must be positive")
    raw = t.points if isinstance(t, Trajectory) else np.asarray(t, dtype=float)
    subs = tuple(circle_segments(p[:2], dot_radius) for p in raw)
    return VectorPath(subs, PathStyle(dotted=True, dot_radius=dot_radius))


def canvas_for(paths: Sequence[VectorPath], margin_fraction: float = 0.05) -> BoundingBox:
    box = bounding_box_of([p.control_points() for p in paths])
    margin = margin_fraction * max(box.diagonal, 1e-9)
    return box.padded(margin)


def _fmt(v: float) -> str:
    s = f"{v:.4f}"
    return "0.0000" if s == "-0.0000" else s


def path_data(path: VectorPath) -> str:
    """SVG ``d`` attribute, y negated so workspace y-up renders upright."""
    parts = []
    for sp in path.subpaths:
        x0, y0 = sp[0, 0]
        cmds = [f"M {_fmt(x0)} {_fmt(-y0)}"]
        for seg in sp:
            cmds.append("C " + " ".join(f"{_fmt(x)} {_fmt(-y)}" for x, y in seg[1:]))
        if path.style.dotted:
            cmds.append("Z")
        parts.append(" ".join(cmds))
    return " ".join(parts)


def svg_document(paths: Sequence[VectorPath], canvas: BoundingBox | None = None) -> str:
    if not paths:
        raise VectorizeError("nothing to export: empty path list")
    if canvas is None:
        canvas = canvas_for(paths)
    # size the document from the viewBox as written so a re-export is identical
    view = [_fmt(canvas.min[0]), _fmt(-canvas.max[1]), _fmt(canvas.width), _fmt(canvas.height)]
    w, h = float(view[2]), float(view[3])
    if not (w > 0 and h > 0):
        raise VectorizeError("canvas must have positive width and height")
    px = SVG_LONG_SIDE_PX / max(w, h)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="{SVG_NS}" version="1.1" '
        f'width="{_fmt(w * px)}" height="{_fmt(h * px)}" viewBox="{" ".join(view)}">',
    ]
    for p in paths:
        if p.style.dotted:
            paint = 'fill="black" stroke="none"'
        else:
            paint = (f'fill="none" stroke="black" stroke-width="{_fmt(p.style.stroke_width)}" '
                     f'stroke-linecap="round" stroke-linejoin="round"')
        lines.append(f'  <path d="{path_data(p)}" {paint}/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def export_svg(paths: Sequence[VectorPath], canvas: BoundingBox | None,
               destination: TextIO) -> None:
    """Write an SVG 1.1 document; ``canvas=None`` fits the paths with a margin."""
    destination.write(svg_document(paths, canvas))


_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[MCZmcz]")


def _parse_path_data(d: str) -> list[np.ndarray]:
    tokens = _NUMBER.findall(d)
    subs: list[np.ndarray] = []
    current: list[np.ndarray] = []
    pos = None
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "M":
            if current:
                subs.append(np.array(current))
            current = []
            pos = np.array([float(tokens[i + 1]), -float(tokens[i + 2])])
            i += 3
        elif tok == "C":
            i += 1
            while i + 5 < len(tokens) and tokens[i] not in "MCZmcz":
                vals = [float(v) for v in tokens[i:i + 6]]
                ctrl = np.array([pos, [vals[0], -vals[1]], [vals[2], -vals[3]], [vals[4], -vals[5]]])
                current.append(ctrl)
                pos = ctrl[3]
                i += 6
        elif tok in "Zz":
            i += 1
        else:
            raise VectorizeError(f"unsupported path token {tok!r}")
    if current:
        subs.append(np.array(current))
    return subs


def parse_svg(text: str) -> tuple[list[VectorPath], BoundingBox]:
    """Read back paths written by :func:`export_svg`, undoing the y flip."""
    root = ET.fromstring(text)
    if root.tag not in ("svg", f"{{{SVG_NS}}}svg"):
        raise VectorizeError(f"root element is {root.tag!r}, not svg")
    x, y, w, h = (float(v) for v in root.attrib["viewBox"].split())
    canvas = BoundingBox((x, -(y + h)), (x + w, -y))
    paths = []
    for el in root.iter(f"{{{SVG_NS}}}path"):
        dotted = el.attrib.get("fill", "none") != "none"
        subs = _parse_path_data(el.attrib["d"])
        if dotted:
            r = float(subs[0][0, 0, 0] - subs[0][1, 3, 0]) / 2.0 if subs else 0.01
            style = PathStyle(dotted=True, dot_radius=r)
        else:
            style = PathStyle(stroke_width=float(el.attrib.get("stroke-width", 0.01)))
        paths.append(VectorPath(tuple(subs), style))
    return paths, canvas
