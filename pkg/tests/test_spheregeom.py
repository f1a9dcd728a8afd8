import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from sevensphere.spheregeom import (
    ArcEdge,
    RadiusMismatch,
    SpherePoint,
    TileRegion,
    bounding_cap,
    chord_dist,
    edge_extreme,
    radial_project,
    sample_edge,
    spherical_polygon_area,
    tile_diameter,
    tile_pair_min_dist,
    unit_circle_frame,
)

vec = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).map(np.array).filter(lambda v: np.linalg.norm(v) > 0.1)
radii = st.floats(0.6, 20.0)


def on_sphere(v, r):
    return v / np.linalg.norm(v) * r


def cap_tile(center, r, k=3):
    """Tile bounded by the unit circle about ``center``, split into ``k`` arcs."""
    o, rho = unit_circle_frame(center, r)
    axis = center / np.linalg.norm(center)
    e1 = np.cross(axis, [0.3, 0.5, 0.8])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    pts = [o + rho * (math.cos(t) * e1 + math.sin(t) * e2) for t in np.linspace(0, 2 * math.pi, k + 1)[:-1]]
    edges = [ArcEdge("unit", pts[i], pts[(i + 1) % k], r, center) for i in range(k)]
    return TileRegion(edges, 0), o, rho


def test_chord_examples():
    r = 3.0
    p = np.array([0, 0, r])
    assert chord_dist(p, -p) == 2 * r
    assert chord_dist(p, p) == 0
    s = math.sqrt(0.5)
    assert chord_dist(SpherePoint(np.array([s, 0, 0]), s), SpherePoint(np.array([0, s, 0]), s)) == pytest.approx(1.0)


def test_radius_mismatch():
    with pytest.raises(RadiusMismatch):
        chord_dist(SpherePoint(np.array([1.0, 0, 0]), 1.0), SpherePoint(np.array([2.0, 0, 0]), 2.0))
    with pytest.raises(ValueError):
        SpherePoint(np.array([1.0, 0, 0]), 2.0)


@given(vec, vec, vec)
def test_chord_metric(a, b, c):
    assert chord_dist(a, b) == pytest.approx(chord_dist(b, a))
    assert chord_dist(a, c) <= chord_dist(a, b) + chord_dist(b, c) + 1e-12


@given(vec, vec, radii)
def test_projection_and_central_angle(a, b, r):
    pa, pb = radial_project(a, r), radial_project(b, r)
    assert np.linalg.norm(pa) == pytest.approx(r)
    assert np.allclose(pa / r, a / np.linalg.norm(a))
    theta = math.atan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b))
    assert chord_dist(pa, pb) == pytest.approx(2 * r * math.sin(theta / 2), abs=1e-12 * r)


def test_project_origin():
    with pytest.raises(ValueError):
        radial_project([0, 0, 0], 1.0)


@settings(max_examples=50)
@given(vec, vec, radii, st.floats(0.005, 0.2))
def test_geodesic_sampling(a, b, r, h):
    a, b = on_sphere(a, r), on_sphere(b, r)
    assume(np.linalg.norm(a + b) > 1e-3 * r)
    e = ArcEdge("geodesic", a, b, r)
    s = sample_edge(e, h)
    L = np.linalg.norm(a - b)
    assert len(s) >= math.ceil(L / h) + 1
    assert np.allclose(np.linalg.norm(s, axis=1), r)
    if e.degenerate:
        assert len(s) == (1 if np.array_equal(a, b) else 2)
        return
    assert np.max(np.linalg.norm(np.diff(s, axis=0), axis=1)) <= h + 1e-12
    if e.length >= h:
        # segment counts are powers of two, so halving h doubles them once the edge spans h
        assert len(sample_edge(e, h / 2)) - 1 == 2 * (len(s) - 1)


@settings(max_examples=50)
@given(vec, st.floats(0.6, 10.0), st.floats(0.1, 2.5))
def test_unit_circle_samples(c, r, span):
    c = on_sphere(c, r)
    tile, o, rho = cap_tile(c, r, k=3)
    for e in tile.edges:
        s = sample_edge(e, 0.01)
        assert np.allclose(np.linalg.norm(s - c, axis=1), 1.0, atol=1e-10)
        assert np.allclose(np.linalg.norm(s, axis=1), r, atol=1e-10)


@pytest.mark.parametrize("r", [0.8, 2.0, 5.0])
def test_cap_diameter_bracket(r):
    c = np.array([0.2, -0.4, 1.0])
    tile, _, rho = cap_tile(on_sphere(c, r), r, k=4)
    lo, hi = tile_diameter(tile, 0.005)
    assert lo <= 2 * rho + 1e-12 <= hi


def test_point_tile():
    p = np.array([0.0, 0.0, 2.0])
    t = TileRegion([ArcEdge("geodesic", p, p, 2.0)], 0)
    assert tile_diameter(t, 0.01) == (0.0, 0.02)


def test_diameter_tightens_with_h():
    tile, _, _ = cap_tile(np.array([0, 0, 3.0]), 3.0)
    h = 0.02
    assert tile_diameter(tile, h / 2)[1] <= tile_diameter(tile, h)[1] + h


@pytest.mark.parametrize("r", [1.0, 3.0])
def test_antipodal_caps(r):
    c = on_sphere(np.array([0.3, 0.1, 0.9]), r)
    a, o, _ = cap_tile(c, r)
    b, _, _ = cap_tile(-c, r)
    lo, hi = tile_pair_min_dist(a, b, 0.005)
    exact = 2 * np.linalg.norm(o)
    assert lo - 1e-12 <= exact <= hi + 1e-12
    assert tile_pair_min_dist(b, a, 0.005) == (lo, hi)


def test_adjacent_tiles_touch():
    r = 2.0
    P = [on_sphere(np.array(v, float), r) for v in ([1, 0, 1], [0, 1, 1], [-1, 0, 1], [0, -1, 1])]
    left = TileRegion([ArcEdge("geodesic", P[0], P[1], r), ArcEdge("geodesic", P[1], P[2], r),
                       ArcEdge("geodesic", P[2], P[0], r)], 0)
    right = TileRegion([ArcEdge("geodesic", P[0], P[2], r), ArcEdge("geodesic", P[2], P[3], r),
                        ArcEdge("geodesic", P[3], P[0], r)], 1)
    assert tile_pair_min_dist(left, right, 0.01)[1] == 0.0


def test_bounding_cap_contains_samples():
    tile, _, _ = cap_tile(np.array([0.0, 1.0, 1.0]) / math.sqrt(2) * 4, 4.0)
    axis, ang = bounding_cap(tile, 0.05)
    s = tile.samples(0.005)
    angles = np.arccos(np.clip(s @ axis / 16.0, -1, 1))
    assert angles.max() <= ang
    p = np.array([0.0, 0.0, 4.0])
    _, ang0 = bounding_cap(TileRegion([ArcEdge("geodesic", p, p, 4.0)], 0), 0.05)
    assert ang0 == pytest.approx(0.05 / 4)


@settings(max_examples=25, deadline=None)
@given(vec, vec, vec, vec, st.floats(1.0, 6.0), st.booleans())
def test_edge_extreme_against_dense_sampling(a, b, c, d, r, want_max):
    a, b, c, d = (on_sphere(x, r) for x in (a, b, c, d))
    assume(min(np.linalg.norm(a + b), np.linalg.norm(c + d)) > 1e-2 * r)
    e1, e2 = ArcEdge("geodesic", a, b, r), ArcEdge("geodesic", c, d, r)
    best, bound = edge_extreme(e1, e2, want_max, tol=1e-9)
    n = 1500
    s1 = e1.at(np.linspace(0, e1.span, n))
    s2 = e2.at(np.linspace(0, e2.span, n))
    D = np.linalg.norm(s1[:, None] - s2[None], axis=-1)
    dense = D.max() if want_max else D.min()
    spacing = max(e1.length, e2.length) / (n - 1)
    if want_max:
        assert dense <= bound + 1e-9 and best <= bound
    else:
        assert dense >= bound - 1e-9 and best >= bound
    assert abs(best - bound) <= 1e-8
    assert abs(dense - best) <= spacing


def test_area_of_octant():
    P = np.eye(3)
    assert spherical_polygon_area(P) == pytest.approx(math.pi / 2)
