"""Points, edges and tiles on a sphere of radius r, measured with chordal distance.

Two kinds of edge occur.  A geodesic edge is the minor great-circle arc between
its endpoints.  A unit-circle edge is an arc of the circle
``{x : |x| = r, |x - c| = 1}`` around a center point ``c`` on the sphere.  Both
are circles on the sphere, so they share one parametrization: a circle center
``o``, a radius ``rho`` and an orthonormal pair ``(e1, e2)`` in the circle's
plane, with the edge covering angles ``[0, span]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class RadiusMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SpherePoint:
    position: np.ndarray
    r: float

    def __post_init__(self):
        n = float(np.linalg.norm(self.position))
        if abs(n - self.r) > 1e-12 * max(self.r, 1.0) * 10:
            raise ValueError(f"point at radius {n} is not on the sphere of radius {self.r}")


def chord_dist(p, q) -> float:
    if isinstance(p, SpherePoint) and isinstance(q, SpherePoint):
        if abs(p.r - q.r) > 1e-12 * max(p.r, 1.0):
            raise RadiusMismatch("points lie on spheres of different radii")
        p, q = p.position, q.position
    return float(np.linalg.norm(np.asarray(p, float) - np.asarray(q, float)))


def radial_project(x, r: float) -> np.ndarray:
    x = np.asarray(x, float)
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("cannot project the origin")
    return x * (r / n)


def unit_circle_frame(center, r: float):
    """Axis point ``o`` and radius ``rho`` of the unit circle about ``center``."""
    if 2 * r < 1:
        raise ValueError("unit circles on the sphere need r >= 1/2")
    c = np.asarray(center, float)
    chat = c / np.linalg.norm(c)
    h = (r * r - 0.5) / r
    rho = math.sqrt(max(r * r - h * h, 0.0))
    return chat * h, rho


@dataclass
class ArcEdge:
    kind: str  # "geodesic" or "unit"
    a: np.ndarray
    b: np.ndarray
    r: float
    center: np.ndarray | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, float)
        self.b = np.asarray(self.b, float)
        if self.kind == "unit":
            if self.center is None:
                raise ValueError("unit-circle edge needs a center")
            self.center = np.asarray(self.center, float)
            o, rho = unit_circle_frame(self.center, self.r)
            axis = self.center / np.linalg.norm(self.center)
        else:
            o = np.zeros(3)
            rho = self.r
            n = np.cross(self.a, self.b)
            nn = np.linalg.norm(n)
            if nn < 1e-15:
                axis = None
            else:
                axis = n / nn
        self.o, self.rho = o, rho
        if axis is None:
            self.e1 = self.e2 = None
            self.span = 0.0
            return
        ua = self.a - o
        ua = ua - np.dot(ua, axis) * axis
        e1 = ua / np.linalg.norm(ua)
        e2 = np.cross(axis, e1)
        ub = self.b - o
        span = math.atan2(np.dot(ub, e2), np.dot(ub, e1))
        if self.kind == "unit":
            # minor arc: flip orientation if needed
            if span < 0:
                e2 = -e2
                span = -span
        elif span < 0:
            span += 2 * math.pi
        self.e1, self.e2, self.span = e1, e2, span

    @property
    def degenerate(self) -> bool:
        return self.span == 0.0 or self.e1 is None

    @property
    def length(self) -> float:
        return self.rho * self.span

    def at(self, phi) -> np.ndarray:
        phi = np.asarray(phi, float)
        if self.degenerate:
            return np.broadcast_to(self.a, phi.shape + (3,)).copy()
        return self.o + self.rho * (np.cos(phi)[..., None] * self.e1 + np.sin(phi)[..., None] * self.e2)

    def reversed(self) -> "ArcEdge":
        return ArcEdge(self.kind, self.b, self.a, self.r, self.center)


def n_segments(length: float, h: float) -> int:
    """Power-of-two segment count so that sample sets are nested under halving ``h``."""
    if length <= 0:
        return 0
    return 1 << max(0, math.ceil(math.log2(max(length / h, 1.0))))


def sample_edge(e: ArcEdge, h: float) -> np.ndarray:
    """Points along ``e`` with arc spacing at most ``h`` (chordal spacing is smaller still)."""
    if h <= 0:
        raise ValueError("h must be positive")
    if e.degenerate:
        # numerically coincident endpoints still both belong to the edge
        return e.a[None].copy() if np.array_equal(e.a, e.b) else np.array([e.a, e.b])
    n = n_segments(e.length, h)
    pts = e.at(np.linspace(0.0, e.span, n + 1))
    pts[0], pts[-1] = e.a, e.b
    return pts


@dataclass
class TileRegion:
    edges: list
    color: int
    id: int = 0

    def __post_init__(self):
        for k, e in enumerate(self.edges):
            nxt = self.edges[(k + 1) % len(self.edges)]
            if np.linalg.norm(e.b - nxt.a) > 1e-9:
                raise ValueError("tile boundary is not closed")

    def samples(self, h: float) -> np.ndarray:
        if not self.edges:
            return np.zeros((0, 3))
        s = np.concatenate([sample_edge(e, h)[:-1] for e in self.edges])
        # a tile shrunk to a point still has that point
        return s if len(s) else self.edges[0].a[None].copy()


def _pairwise(a, b):
    return np.sqrt(np.maximum(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1), 0.0))


def tile_diameter(t: TileRegion, h: float):
    s = t.samples(h)
    if len(s) == 0:
        raise ValueError("empty tile boundary")
    lower = float(_pairwise(s, s).max())
    return lower, lower + 2 * h


def tile_pair_min_dist(a: TileRegion, b: TileRegion, h: float):
    """Sampled bracket ``(lower, upper)`` for the distance between two tiles.

    Returns ``(0, 0, True)`` style overlap information through the third value.
    """
    sa, sb = a.samples(h), b.samples(h)
    upper = float(_pairwise(sa, sb).min())
    lower = max(upper - 2 * h, 0.0)
    return lower, upper


def bounding_cap(t: TileRegion, h: float = 0.05):
    """Axis (a sphere point) and angular radius of a cap holding the tile's boundary."""
    s = t.samples(h)
    r = float(np.linalg.norm(s[0]))
    c = s.mean(axis=0)
    if np.linalg.norm(c) < 1e-12:
        c = s[0]
    axis = c / np.linalg.norm(c) * r
    cosang = np.clip(s @ axis / (r * r), -1.0, 1.0)
    ang = float(np.arccos(cosang).max())
    # boundary samples are conservative only up to the arcs between samples;
    # widen by the largest possible bulge of a sampled circle arc.
    return axis, ang + h / r


def cap_chord_gap(axis_a, ang_a, axis_b, ang_b, r: float) -> float:
    """Lower bound on the chordal distance between two caps."""
    cosc = np.clip(np.dot(axis_a, axis_b) / (r * r), -1.0, 1.0)
    gap = math.acos(cosc) - ang_a - ang_b
    if gap <= 0:
        return 0.0
    return 2 * r * math.sin(min(gap, math.pi) / 2)


# ---------------------------------------------------------------------------
# closed-form and refined distances used by the verifier


def point_circle_extremes(p, e: ArcEdge):
    """Minimum and maximum distance from ``p`` to points of edge ``e``."""
    if e.degenerate:
        d = float(np.linalg.norm(p - e.a))
        return d, d
    q = p - e.o
    a, b = float(np.dot(q, e.e1)), float(np.dot(q, e.e2))
    base = float(np.dot(q, q)) + e.rho ** 2
    phis = [0.0, e.span]
    star = math.atan2(b, a) % (2 * math.pi)
    for cand in (star, (star + math.pi) % (2 * math.pi)):
        if cand <= e.span:
            phis.append(cand)
    vals = [math.sqrt(max(base - 2 * e.rho * (a * math.cos(f) + b * math.sin(f)), 0.0)) for f in phis]
    return min(vals), max(vals)


def circle_extremes_many(P: np.ndarray, e: ArcEdge):
    """Vectorized :func:`point_circle_extremes` for points ``P`` of shape (n, 3)."""
    P = np.atleast_2d(P)
    if e.degenerate:
        d = np.linalg.norm(P - e.a, axis=1)
        return d, d
    Q = P - e.o
    a, b = Q @ e.e1, Q @ e.e2
    base = np.einsum("ij,ij->i", Q, Q) + e.rho ** 2
    star = np.mod(np.arctan2(b, a), 2 * math.pi)
    opp = np.mod(star + math.pi, 2 * math.pi)
    cands = [np.zeros_like(a), np.full_like(a, e.span), star, opp]
    lo = np.full_like(a, np.inf)
    hi = np.full_like(a, -np.inf)
    for k, f in enumerate(cands):
        ok = np.ones_like(a, bool) if k < 2 else f <= e.span
        v = np.sqrt(np.maximum(base - 2 * e.rho * (a * np.cos(f) + b * np.sin(f)), 0.0))
        lo = np.where(ok, np.minimum(lo, v), lo)
        hi = np.where(ok, np.maximum(hi, v), hi)
    return lo, hi


def edge_extreme(e1: ArcEdge, e2: ArcEdge, want_max: bool, tol: float = 1e-9, h: float = 0.005):
    """Global max (or min) of ``|x - y|`` over ``x`` on ``e1`` and ``y`` on ``e2``.

    Branch and bound over the angle of ``e1`` using the exact extreme over
    ``e2`` at each probe.  Inside an interval of width ``w`` the value can
    exceed (for a max) the chord through its end values by at most
    ``rho1 * w**2 / 8`` because every ``phi -> |x(phi) - y|`` has second
    derivative at least ``-rho1``; for a min the analogous bound uses
    ``rho1**2 / d + rho1``.  The Lipschitz bound ``rho1 * w / 2`` is used when
    tighter.  Returns ``(best, bound)`` with ``|best - bound| <= tol``.
    """
    sign = 1.0 if want_max else -1.0
    if e1.degenerate:
        lo, hi = circle_extremes_many(e1.a[None], e2)
        v = float(hi[0] if want_max else lo[0])
        return v, v

    def F(phi):
        lo, hi = circle_extremes_many(e1.at(phi), e2)
        return sign * (hi if want_max else lo)

    rho = e1.rho
    n = max(4, n_segments(e1.length, h))
    a = np.linspace(0.0, e1.span, n + 1)
    fv = F(a)
    A, B, FA, FB = a[:-1], a[1:], fv[:-1], fv[1:]
    best = float(fv.max())

    def bounds(A, B, FA, FB):
        w = B - A
        lip = np.maximum(FA, FB) + rho * w / 2 - np.abs(FA - FB) / 2
        if want_max:
            return np.minimum(lip, 0.5 * (FA + FB) + rho * w * w / 8)
        # the curvature bound needs a positive lower bound on the distance in the interval
        dmin = -np.maximum(FA, FB) - rho * w / 2
        K = rho * rho / np.maximum(dmin, 1e-300) + rho
        quad = np.where(dmin > 0, 0.5 * (FA + FB) + K * w * w / 8, np.inf)
        # distances are non-negative
        return np.minimum(np.minimum(lip, quad), 0.0)

    bd = bounds(A, B, FA, FB)
    for _ in range(200):
        keep = bd > best + tol
        if not keep.any():
            break
        A, B, FA, FB = A[keep], B[keep], FA[keep], FB[keep]
        M = 0.5 * (A + B)
        FM = F(M)
        best = max(best, float(FM.max()))
        A, B, FA, FB = np.concatenate([A, M]), np.concatenate([M, B]), np.concatenate([FA, FM]), np.concatenate([FM, FB])
        bd = bounds(A, B, FA, FB)
        if len(A) > 200000:
            break
    top = max(best, float(bd.max()) if len(bd) else best)
    if top - best > tol:
        top = max(best, float(bd[bd > best + tol].max()))
    return sign * best, sign * top


def spherical_polygon_area(points: np.ndarray) -> float:
    """Solid angle (steradians) enclosed counterclockwise by a closed geodesic polyline."""
    P = points / np.linalg.norm(points, axis=1)[:, None]
    c = P.mean(axis=0)
    c /= np.linalg.norm(c)
    A, B = P, np.roll(P, -1, axis=0)
    num = np.cross(A, B) @ c
    den = 1 + A @ c + np.einsum("ij,ij->i", A, B) + B @ c
    return float(2 * np.arctan2(num, den).sum())
