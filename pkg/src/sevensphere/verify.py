"""Independent validity checks for realized tilings.

Distances are recomputed from the vertex table and edge kinds alone.  Every
tile boundary is a loop of circle arcs (great circles or unit circles), so the
verifier bounds distances between two boundary elements by a Lipschitz branch
and bound along one element with the exact extreme over the other.  Brackets
returned here are therefore tight (width at most ``refine_tol``) wherever a
value is close to 1, and the cheaper sampled bracket of width ``2h`` is used
only when it already decides the question.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .goldberg import build_ico_net
from .spheregeom import ArcEdge, cap_chord_gap, edge_extreme, n_segments, sample_edge, spherical_polygon_area
from .tiling import SphericalTiling


class CoverageGap(RuntimeError):
    pass


class OverlapError(RuntimeError):
    pass


@dataclass
class VerifyReport:
    valid: bool
    worst_diameter: tuple  # (tile id, (lower, upper))
    worst_separation: tuple  # ((tile, tile), (lower, upper))
    siamese: list
    unscalable: list
    classification: str
    h: float
    tol: float
    n_tiles: int = 0
    n_pairs: int = 0
    area_error: float = 0.0
    patch_mode: bool = False
    diameters: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "valid": bool(self.valid),
            "worst_diameter": {"tile": int(self.worst_diameter[0]), "bracket": list(map(float, self.worst_diameter[1]))},
            "worst_separation": {
                "pair": [int(x) for x in self.worst_separation[0]] if self.worst_separation[0] else None,
                "bracket": ([float(x) for x in self.worst_separation[1]]
                            if self.worst_separation[0] else None),
            },
            "siamese": [list(map(int, p)) for p in self.siamese],
            "unscalable": [int(t) for t in self.unscalable],
            "classification": self.classification,
            "h": self.h,
            "tol": self.tol,
            "n_tiles": self.n_tiles,
            "n_pairs": self.n_pairs,
            "area_error": self.area_error,
            "patch_mode": self.patch_mode,
        }


def _edges(t: SphericalTiling, k: int) -> list:
    return t.region(k).edges


def _samples(edges, h):
    return np.concatenate([sample_edge(e, h)[:-1] for e in edges])


def _dist(a, b):
    sq = np.einsum("ij,ij->i", a, a)[:, None] + np.einsum("ij,ij->i", b, b)[None] - 2.0 * (a @ b.T)
    return np.sqrt(np.maximum(sq, 0.0))


class _Geometry:
    """Per-tile edges, edge samples and edge bounding balls, computed once.

    Every point of an edge lies within ``h / 2`` of one of its samples, so a
    ball around the samples widened by ``h / 2`` holds the whole edge.
    """

    def __init__(self, t: SphericalTiling, h: float):
        self.t, self.h = t, h
        self._cache = {}

    def __call__(self, k: int):
        g = self._cache.get(k)
        if g is None:
            edges = _edges(self.t, k)
            samples = [sample_edge(e, self.h) for e in edges]
            cen = np.array([s.mean(0) for s in samples])
            rad = np.array([np.linalg.norm(s - c, axis=1).max() + self.h / 2 for s, c in zip(samples, cen)])
            g = self._cache[k] = (edges, samples, cen, rad)
        return g


def _refined(e_a, e_b, want_max, tol):
    best = None
    bound = None
    for ea in e_a:
        for eb in e_b:
            v, bd = edge_extreme(ea, eb, want_max, tol=tol)
            if best is None or (v > best if want_max else v < best):
                best = v
            if bound is None or (bd > bound if want_max else bd < bound):
                bound = bd
    return best, bound


def tile_diameter_bracket(t: SphericalTiling, k: int, h: float, tol: float, refine_tol: float = 1e-9,
                          geom: _Geometry | None = None):
    """``(lower, upper)`` for the diameter of tile ``k``.

    Edge pairs are screened with bounding balls, then with samples (slack
    ``2h``), and only pairs still undecided against ``1 + tol`` are refined.
    """
    edges, samples, cen, rad = (geom or _Geometry(t, h))(k)
    n = len(edges)
    D = np.linalg.norm(cen[:, None] - cen[None], axis=-1)
    reach = D + rad[:, None] + rad[None]
    lower = upper = 0.0
    for i in range(n):
        for j in range(i, n):
            if reach[i, j] <= lower:
                continue
            v = float(_dist(samples[i], samples[j]).max())
            lower = max(lower, v)
            ub = min(v + 2 * h, reach[i, j])
            if ub > 1 + tol:
                v, ub = edge_extreme(edges[i], edges[j], True, tol=refine_tol)
                lower = max(lower, v)
            upper = max(upper, ub)
    return lower, max(upper, lower)


def pair_distance_bracket(t: SphericalTiling, a: int, b: int, h: float, tol: float, refine_tol: float = 1e-9,
                          geom: _Geometry | None = None):
    """``(lower, upper)`` for the distance between tiles ``a`` and ``b``."""
    geom = geom or _Geometry(t, h)
    ea, sa, ca, ra = geom(a)
    eb, sb, cb, rb = geom(b)
    gap = np.linalg.norm(ca[:, None] - cb[None], axis=-1) - ra[:, None] - rb[None]
    # distances actually attained, from the vertices
    upper = float(_dist(np.array([s[0] for s in sa]), np.array([s[0] for s in sb])).min())
    lower = math.inf
    for i, j in zip(*np.nonzero(gap < upper)):
        if gap[i, j] >= upper:
            continue
        v = float(_dist(sa[i], sb[j]).min())
        upper = min(upper, v)
        lb = max(v - 2 * h, gap[i, j])
        if lb < 1 - tol:
            v, lb = edge_extreme(ea[i], eb[j], False, tol=refine_tol)
            upper = min(upper, v)
        lower = min(lower, lb)
    return max(min(lower, upper), 0.0), upper


def _polyline(t, k, h):
    return _samples(_edges(t, k), h)


def coverage_error(t: SphericalTiling, h: float) -> float:
    total = 0.0
    for k in range(len(t.tiles)):
        a = spherical_polygon_area(_polyline(t, k, h))
        if a <= 0 or a >= 2 * math.pi:
            raise OverlapError(f"tile {k} has invalid orientation or area {a}")
        total += a
    return total - 4 * math.pi


def _check_structure(t: SphericalTiling):
    count = {}
    for cyc in t.tiles:
        n = len(cyc)
        for i in range(n):
            key = (cyc[i], cyc[(i + 1) % n])
            count[key] = count.get(key, 0) + 1
    for (u, v), c in count.items():
        if c > 1:
            raise OverlapError(f"directed edge {(u, v)} used by {c} tiles")
        if (v, u) not in count:
            raise CoverageGap(f"edge {(u, v)} borders only one tile")


def contacts(t: SphericalTiling) -> list:
    at = {}
    for k, cyc in enumerate(t.tiles):
        for v in cyc:
            at.setdefault(v, set()).add(k)
    out = [set() for _ in t.tiles]
    for ts in at.values():
        for a in ts:
            out[a] |= ts - {a}
    return out


def unscalable_tiles(t: SphericalTiling) -> list:
    col = t.colors
    out = []
    for k, nb in enumerate(contacts(t)):
        seen = {}
        for u in nb:
            seen[col[u]] = seen.get(col[u], 0) + 1
        if any(c >= 2 for c in seen.values()):
            out.append(k)
    return out


def _centers(t):
    c = np.array([t.vertices[cyc].mean(0) for cyc in t.tiles])
    c = c / np.linalg.norm(c, axis=1)[:, None] * t.r
    ang = np.array([np.arccos(np.clip(t.vertices[cyc] @ c[k] / t.r ** 2, -1, 1)).max() for k, cyc in enumerate(t.tiles)])
    # unit arcs bulge past their chord by at most their sagitta
    return c, ang + 0.2 / t.r


def same_color_pairs(t: SphericalTiling, margin: float = 0.5):
    c, ang = _centers(t)
    col = np.asarray(t.colors)
    out = []
    from scipy.spatial import cKDTree

    tree = cKDTree(c)
    lim = 2 * t.r * math.sin(min(math.pi, 2 * ang.max() + 2 * math.asin(min(1.0, (1 + margin) / (2 * t.r)))) / 2)
    for a, b in sorted(tree.query_pairs(lim + 1e-9)):
        if col[a] != col[b]:
            continue
        if cap_chord_gap(c[a], ang[a], c[b], ang[b], t.r) <= 1 + margin:
            out.append((a, b))
    if len(t.tiles) <= 64:  # tiny fixtures: every same-colored pair
        out = [(a, b) for a in range(len(t.tiles)) for b in range(a + 1, len(t.tiles)) if col[a] == col[b]]
    return out


def siamese_pairs(t: SphericalTiling, h: float = 0.005, geom: _Geometry | None = None) -> list:
    """Tile pairs whose union has every pairwise distance below 1.

    Each tile then lies inside the inner boundary of the other's annulus of
    exclusion.  Any two vertices at distance at least 1 rule a pair out.
    """
    from scipy.spatial import cKDTree

    geom = geom or _Geometry(t, h)
    # vertex means are convex combinations, so they are closer than 1 too
    c = np.array([t.vertices[cyc].mean(0) for cyc in t.tiles])
    tree = cKDTree(c)
    out = []
    for a, b in sorted(tree.query_pairs(1.0)):
        va, vb = t.vertices[t.tiles[a]], t.vertices[t.tiles[b]]
        if _dist(va, vb).max() >= 1 or _dist(va, va).max() >= 1 or _dist(vb, vb).max() >= 1:
            continue
        ea, sa, _, _ = geom(a)
        eb, sb, _, _ = geom(b)
        pa, pb = np.concatenate(sa), np.concatenate(sb)
        if max(_dist(pa, pb).max(), _dist(pa, pa).max(), _dist(pb, pb).max()) >= 1:
            continue
        both = ea + eb
        if _refined(both, both, True, 1e-9)[1] < 1:
            out.append((a, b))
    return out


def scalability_class(t: SphericalTiling, tol: float = 1e-6, feasible_at=None) -> str:
    """``scalable``, ``unscalable`` or ``quasi-scalable``.

    ``feasible_at(r)`` is an optional oracle reporting whether the same
    combinatorial tiling can be realized validly at radius ``r``; without it an
    unscalable tiling is reported as ``unscalable``.
    """
    if not unscalable_tiles(t):
        return "scalable"
    if feasible_at is not None and feasible_at(t.r * 0.98) and feasible_at(t.r * 1.02):
        return "quasi-scalable"
    return "unscalable"


def verify_tiling(t: SphericalTiling, tol: float = 1e-6, h: float = 0.005, patch: bool = False,
                  feasible_at=None, check_siamese: bool = True) -> VerifyReport:
    if not patch:
        _check_structure(t)
        err = coverage_error(t, h)
        if abs(err) > 1e-6 * 4 * math.pi:
            raise CoverageGap(f"tiles cover {4 * math.pi + err} sr instead of 4 pi")
    else:
        err = float("nan")
    worst_d = (-1, (-math.inf, -math.inf))
    diams = {}
    geom = _Geometry(t, h)
    for k in range(len(t.tiles)):
        br = tile_diameter_bracket(t, k, h, tol, geom=geom)
        diams[k] = br
        if br[1] > worst_d[1][1]:
            worst_d = (k, br)
    pairs = same_color_pairs(t)
    worst_s = (None, (math.inf, math.inf))
    for a, b in pairs:
        br = pair_distance_bracket(t, a, b, h, tol, geom=geom)
        if br[0] < worst_s[1][0]:
            worst_s = ((a, b), br)
    valid = worst_d[1][1] <= 1 + tol and worst_s[1][0] >= 1 - tol
    siam = siamese_pairs(t, h, geom) if check_siamese else []
    unsc = unscalable_tiles(t)
    cls = scalability_class(t, tol, feasible_at) if valid else "invalid"
    return VerifyReport(valid, worst_d, worst_s, siam, unsc, cls, h, tol, len(t.tiles), len(pairs), err, patch, diams)


# ---------------------------------------------------------------------------
# Platonic fixtures


def _order_ccw(points, idx, axis):
    e1 = np.cross(axis, [0.31, 0.57, 0.76])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return sorted(idx, key=lambda i: math.atan2(points[i] @ e2, points[i] @ e1))


def _dual(V, faces):
    C = np.array([V[list(f)].mean(0) for f in faces])
    C /= np.linalg.norm(C, axis=1)[:, None]
    dfaces = []
    for v in range(len(V)):
        inc = [i for i, f in enumerate(faces) if v in f]
        dfaces.append(_order_ccw(C, inc, V[v]))
    return C, dfaces


def _antipodal_colors(C):
    col = [-1] * len(C)
    nxt = 0
    for i in range(len(C)):
        if col[i] < 0:
            j = int(np.argmin(np.linalg.norm(C + C[i], axis=1)))
            col[i] = col[j] = nxt
            nxt += 1
    return col


def build_platonic_fixture(solid: str, r: float) -> SphericalTiling:
    if r <= 0:
        raise ValueError("radius must be positive")
    if solid == "octahedron":
        V = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
        faces = []
        for sx in (0, 1):
            for sy in (2, 3):
                for sz in (4, 5):
                    f = [sx, sy, sz]
                    n = V[f].sum(0)
                    faces.append(_order_ccw(V, f, n / np.linalg.norm(n)))
        C = np.array([V[f].mean(0) for f in faces])
        colors = _antipodal_colors(C)
    elif solid == "cube":
        O = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
        of = []
        for sx in (0, 1):
            for sy in (2, 3):
                for sz in (4, 5):
                    of.append([sx, sy, sz])
        V, faces = _dual(O, of)
        colors = list(range(6))
    elif solid == "dodecahedron":
        net = build_ico_net()
        V, faces = _dual(net.vertices, [list(f) for f in net.faces])
        C = np.array([V[f].mean(0) for f in faces])
        colors = _antipodal_colors(C)
    else:
        raise ValueError(f"unknown solid {solid!r}")
    return SphericalTiling(float(r), V * r, [list(map(int, f)) for f in faces], colors,
                           spec={"fixture": solid})
