import math

import numpy as np
import pytest

from sevensphere.tiling import SphericalTiling
from sevensphere.verify import (
    CoverageGap,
    build_platonic_fixture,
    pair_distance_bracket,
    same_color_pairs,
    scalability_class,
    siamese_pairs,
    tile_diameter_bracket,
    unscalable_tiles,
    verify_tiling,
)

H = 0.005


def fixture_valid(solid, r):
    return verify_tiling(build_platonic_fixture(solid, r), tol=1e-9, h=H).valid


def test_fixture_shapes():
    cube = build_platonic_fixture("cube", 0.6)
    assert len(cube.tiles) == 6 and sorted(cube.colors) == list(range(6))
    dod = build_platonic_fixture("dodecahedron", 0.62)
    assert len(dod.tiles) == 12 and len(set(dod.colors)) == 6
    cen = np.array([dod.vertices[c].mean(0) for c in dod.tiles])
    for a in range(12):
        b = int(np.argmin(np.linalg.norm(cen + cen[a], axis=1)))
        assert dod.colors[a] == dod.colors[b]
    with pytest.raises(ValueError):
        build_platonic_fixture("tetrahedron", 1.0)


def test_octahedron_neighbours_differ():
    o = build_platonic_fixture("octahedron", math.sqrt(0.5))
    for a in range(8):
        for b in range(a + 1, 8):
            if len(set(o.tiles[a]) & set(o.tiles[b])) == 2:
                assert o.colors[a] != o.colors[b]


def test_octahedron_unscalable_not_quasi():
    r = math.sqrt(0.5)
    o = build_platonic_fixture("octahedron", r)
    rep = verify_tiling(o, tol=1e-9, h=H)
    assert rep.valid
    assert sorted(rep.unscalable) == list(range(8))
    oracle = lambda s: fixture_valid("octahedron", s)  # noqa: E731
    assert scalability_class(o, feasible_at=oracle) == "unscalable"


@pytest.mark.parametrize("r", [math.sqrt(1 / 3) + 2 * H, 0.59, 0.60, math.sqrt(3 / 8)])
def test_cube_valid_in_range(r):
    assert fixture_valid("cube", r)


@pytest.mark.parametrize("r", [math.sqrt(3 / 8) + 2 * H, 0.65])
def test_cube_invalid_above_range(r):
    # opposite corners of a face sit at chord r * sqrt(8/3)
    assert not fixture_valid("cube", r)


def test_dodecahedron_transition():
    s = math.sqrt(3 / 8)
    assert not fixture_valid("dodecahedron", s - 2 * H)
    assert not fixture_valid("dodecahedron", 0.60)
    assert fixture_valid("dodecahedron", s + 2 * H)
    assert fixture_valid("dodecahedron", 0.62)


def test_fixture_classification():
    assert verify_tiling(build_platonic_fixture("cube", 0.6)).classification == "scalable"


def test_coverage_gap_detected():
    cube = build_platonic_fixture("cube", 0.6)
    broken = SphericalTiling(cube.r, cube.vertices, cube.tiles[:-1], cube.colors[:-1])
    with pytest.raises(CoverageGap):
        verify_tiling(broken)


def _brute_samples(t, k, h):
    return np.concatenate([e.at(np.linspace(0, e.span, max(2, int(math.ceil(e.length / h)) + 1)))
                           for e in t.region(k).edges])


def test_diameter_brackets_against_brute_force(tiling43):
    rng = np.random.default_rng(0)
    for k in rng.choice(len(tiling43.tiles), 25, replace=False):
        lo, hi = tile_diameter_bracket(tiling43, int(k), H, 1e-6)
        s = _brute_samples(tiling43, int(k), H / 4)
        brute = np.linalg.norm(s[:, None] - s[None], axis=-1).max()
        # brute is attained, and the true value is within h/4 of it
        assert brute <= hi + 1e-12
        assert lo <= brute + H / 4 + 1e-12


def test_pair_brackets_against_brute_force(tiling43):
    pairs = same_color_pairs(tiling43)
    rng = np.random.default_rng(1)
    for i in rng.choice(len(pairs), 25, replace=False):
        a, b = pairs[int(i)]
        lo, hi = pair_distance_bracket(tiling43, a, b, H, 1e-6)
        sa, sb = _brute_samples(tiling43, a, H / 4), _brute_samples(tiling43, b, H / 4)
        brute = np.linalg.norm(sa[:, None] - sb[None], axis=-1).min()
        assert brute >= lo - 1e-12
        assert hi >= brute - H / 4 - 1e-12
        assert pair_distance_bracket(tiling43, b, a, H, 1e-6) == pytest.approx((lo, hi), abs=1e-9)


def test_pruned_pairs_are_far(tiling43):
    kept = set(same_color_pairs(tiling43))
    col = np.asarray(tiling43.colors)
    V = tiling43.vertices
    for a in range(len(tiling43.tiles)):
        for b in range(a + 1, len(tiling43.tiles)):
            if col[a] != col[b] or (a, b) in kept:
                continue
            d = np.linalg.norm(V[tiling43.tiles[a]][:, None] - V[tiling43.tiles[b]][None], axis=-1).min()
            # tiles are at most ~1 across, so vertex distance > 2.2 puts the boundaries beyond 1
            assert d > 2.2


def test_adjacent_pair_distance_zero(tiling43):
    a = 0
    b = next(k for k in range(1, len(tiling43.tiles)) if len(set(tiling43.tiles[a]) & set(tiling43.tiles[k])) == 2)
    assert pair_distance_bracket(tiling43, a, b, H, 1e-6)[1] == 0.0


def _polar_triangle(r, z, size):
    pts = []
    for k in range(3):
        v = np.array([size * math.cos(2 * math.pi * k / 3), size * math.sin(2 * math.pi * k / 3), z])
        pts.append(v / np.linalg.norm(v) * r)
    return pts


def test_siamese_small_caps():
    r = 0.4
    north = _polar_triangle(r, 1.0, 0.05)
    south = _polar_triangle(r, -1.0, 0.05)[::-1]
    V = np.array(north + south)
    t = SphericalTiling(r, V, [[0, 1, 2], [3, 4, 5]], [0, 0])
    assert siamese_pairs(t) == [(0, 1)]


def test_no_siamese_on_large_sphere(tiling43):
    assert siamese_pairs(tiling43) == []


def test_unscalable_count(tiling43):
    assert set(unscalable_tiles(tiling43)) == set(tiling43.expected_unscalable)
    assert len(tiling43.expected_unscalable) == 180
