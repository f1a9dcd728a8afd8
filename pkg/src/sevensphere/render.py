"""Deterministic SVG output: tilings (orthographic or net view) and range charts.

Only paths, polygons, fills and strokes are emitted.  Coordinates are printed
with a fixed number of decimals, so equal inputs give byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spheregeom import sample_edge
from .tiling import SphericalTiling

PALETTE = ("#e6194b", "#f58231", "#ffe119", "#3cb44b", "#42d4f4", "#4363d8", "#911eb4")


@dataclass
class RenderSpec:
    projection: str = "orthographic"  # or "net"
    axis: tuple = (0.35, 0.25, 0.9)  # view direction (orthographic) or net center
    size: int = 800
    palette: tuple = PALETTE
    stroke: str = "#222222"
    stroke_width: float = 0.6
    unit_chords: bool = True
    sample_h: float = 0.05

    def __post_init__(self):
        if self.projection not in ("orthographic", "net"):
            raise ValueError(f"unknown projection {self.projection!r}")
        if len(self.palette) < 7 or len(set(self.palette)) < 7:
            raise ValueError("palette needs 7 distinct entries")
        if np.linalg.norm(self.axis) == 0:
            raise ValueError("axis must be nonzero")


def _frame(axis):
    w = np.asarray(axis, float)
    w = w / np.linalg.norm(w)
    helper = np.array([0.0, 0.0, 1.0]) if abs(w[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(helper, w)
    u /= np.linalg.norm(u)
    v = np.cross(w, u)
    return u, v, w


def _project(P, spec: RenderSpec, r: float):
    """2D coordinates in units of ``r`` and a per-point visibility flag."""
    u, v, w = _frame(spec.axis)
    if spec.projection == "orthographic":
        return np.column_stack([P @ u, P @ v]) / r, P @ w >= 0
    # net: azimuthal equidistant about the axis (exact unfolding for small patches)
    Q = P / np.linalg.norm(P, axis=-1, keepdims=True)
    ang = np.arccos(np.clip(Q @ w, -1.0, 1.0))
    xy = np.column_stack([Q @ u, Q @ v])
    n = np.linalg.norm(xy, axis=1)
    scale = np.where(n > 1e-15, ang / np.maximum(n, 1e-15), 1.0)
    return xy * scale[:, None] * r, np.ones(len(P), bool)


def _fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _path(points) -> str:
    return "M" + " L".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points) + " Z"


def render_tiling(t: SphericalTiling, spec: RenderSpec | None = None) -> str:
    """SVG image of ``t``; back-facing tiles are culled in orthographic mode."""
    spec = spec or RenderSpec()
    boundaries, centers = [], []
    for k in range(len(t.tiles)):
        reg = t.region(k)
        pts = np.concatenate([sample_edge(e, spec.sample_h * t.r)[:-1] for e in reg.edges])
        boundaries.append(pts)
        c = t.vertices[t.tiles[k]].mean(axis=0)
        centers.append(c)
    flat = np.concatenate(boundaries)
    xy_all, _ = _project(flat, spec, t.r)
    if spec.projection == "orthographic":
        lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    else:
        lo, hi = xy_all.min(axis=0), xy_all.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    pad = 0.02 * span
    scale = spec.size / (span + 2 * pad)

    def to_px(xy):
        return np.column_stack([(xy[:, 0] - lo[0] + pad) * scale, (hi[1] - xy[:, 1] + pad) * scale])

    _, _, w = _frame(spec.axis)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{spec.size}" height="{spec.size}" '
        f'viewBox="0 0 {spec.size} {spec.size}">',
        f'<rect x="0" y="0" width="{spec.size}" height="{spec.size}" fill="#ffffff"/>',
    ]
    order = range(len(t.tiles))
    if spec.projection == "orthographic":
        order = sorted(order, key=lambda k: (float(centers[k] @ w), k))
    for k in order:
        if spec.projection == "orthographic" and centers[k] @ w < 0:
            continue
        xy, _ = _project(boundaries[k], spec, t.r)
        color = spec.palette[int(t.colors[k]) % len(spec.palette)]
        out.append(f'<path d="{_path(to_px(xy))}" fill="{color}" stroke="{spec.stroke}" '
                   f'stroke-width="{spec.stroke_width}"/>')
    if spec.unit_chords:
        for a, b in sorted(tuple(sorted(c)) for c in t.unit_chords):
            P = t.vertices[[a, b]]
            xy, vis = _project(P, spec, t.r)
            if not vis.all():
                continue
            px = to_px(xy)
            out.append(f'<path d="M{_fmt(px[0, 0])},{_fmt(px[0, 1])} L{_fmt(px[1, 0])},{_fmt(px[1, 1])}" '
                       f'fill="none" stroke="#000000" stroke-width="{spec.stroke_width * 0.5:.2f}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass
class RangeRow:
    m: int
    r_min: float
    r_max: float
    extra: dict = field(default_factory=dict)


def render_ranges(rows: list, width: int = 640, height: int | None = None) -> str:
    """Horizontal bars of feasible radius ranges, one per m (the layout of the range figure)."""
    rows = sorted(rows, key=lambda row: row.m)
    height = height or 60 + 40 * max(len(rows), 1)
    if not rows:
        hi = 1.0
    else:
        hi = max(row.r_max for row in rows) * 1.05
    left, right, top = 50, 20, 20
    scale = (width - left - right) / hi

    def x(r):
        return left + r * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    axis_y = height - 30
    out.append(f'<path d="M{left},{axis_y} L{width - right},{axis_y}" stroke="#000000" stroke-width="1"/>')
    step = 1 if hi <= 12 else 2 if hi <= 30 else 5
    for k in range(0, int(hi) + 1, step):
        out.append(f'<path d="M{_fmt(x(k))},{axis_y} L{_fmt(x(k))},{axis_y + 5}" stroke="#000000" stroke-width="1"/>')
    for i, row in enumerate(rows):
        y = top + 40 * i
        out.append(f'<path d="M{_fmt(x(row.r_min))},{y} L{_fmt(x(row.r_max))},{y} L{_fmt(x(row.r_max))},{y + 20} '
                   f'L{_fmt(x(row.r_min))},{y + 20} Z" fill="{PALETTE[i % 7]}" stroke="#000000" stroke-width="0.8"/>')
        # m as a row of tick marks at the left (text elements are outside the SVG subset used)
        for j in range(row.m):
            out.append(f'<path d="M{8 + 4 * j},{y + 4} L{8 + 4 * j},{y + 16}" stroke="#000000" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
