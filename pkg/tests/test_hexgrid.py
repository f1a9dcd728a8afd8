import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sevensphere.hexgrid import (
    HEX,
    IDENTITY,
    SWAP23,
    AxialCoord,
    ColorId,
    Perm7,
    edge_step,
    from_complex,
    hexagon_vertices,
    isbell_color,
    isbell_separation_ratio,
    neighbors,
    perm_apply,
    perm_compose,
    perm_order,
    to_complex,
)

coords = st.tuples(st.integers(-50, 50), st.integers(-50, 50))
perms = st.permutations(list(range(7))).map(Perm7)


def test_neighbors_of_origin():
    assert neighbors((0, 0)) == [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]


@given(coords)
def test_neighbors_are_unit_steps(c):
    ns = neighbors(c)
    assert c not in ns
    assert len(set(ns)) == 6
    for n in ns:
        assert abs(abs(to_complex(n) - to_complex(c)) - 1.0) < 1e-12


def test_isbell_color_examples():
    assert isbell_color((0, 0)) == 0
    ring = [isbell_color(n) for n in neighbors((0, 0))]
    assert ring == [1, 5, 4, 6, 2, 3]
    assert isbell_color((7, 0)) == 0 and isbell_color((1, 2)) == 0


def test_color_zero_translates_brute_force():
    # color-0 cells closest to the origin, by scanning a 15 x 15 window
    zeros = [(q, r) for q in range(-7, 8) for r in range(-7, 8) if (q, r) != (0, 0) and isbell_color((q, r)) == 0]
    dmin = min(abs(to_complex(c)) for c in zeros)
    assert dmin == pytest.approx(math.sqrt(7))
    assert (1, 2) in zeros and (7, 0) in zeros


@given(coords)
def test_isbell_coloring_is_proper_on_neighbors(c):
    assert all(isbell_color(n) != isbell_color(c) for n in neighbors(c))
    assert sorted([isbell_color(c)] + [isbell_color(n) for n in neighbors(c)]) == list(range(7))


@given(coords)
def test_complex_round_trip(c):
    assert from_complex(to_complex(c)) == AxialCoord(*c)


def test_color_id_range():
    with pytest.raises(ValueError):
        ColorId(7)
    with pytest.raises(ValueError):
        Perm7([0, 0, 1, 2, 3, 4, 5])


def test_perm_apply_examples():
    start = list(range(7))
    assert perm_apply(HEX, start) == [0, 3, 6, 2, 5, 1, 4]
    assert perm_apply(IDENTITY, [6, 5, 4, 3, 2, 1, 0]) == [6, 5, 4, 3, 2, 1, 0]
    assert perm_apply(SWAP23, [0, 3, 6, 2, 5, 1, 4]) == [0, 3, 2, 6, 5, 1, 4]
    with pytest.raises(ValueError):
        perm_apply(HEX, [0, 1, 2])


def test_five_edge_steps_cycle():
    seq = list(range(7))
    expected = [
        [0, 3, 2, 6, 5, 1, 4],
        [0, 6, 2, 4, 1, 3, 5],
        [0, 4, 2, 5, 3, 6, 1],
        [0, 5, 2, 1, 6, 4, 3],
        [0, 1, 2, 3, 4, 5, 6],
    ]
    for want in expected:
        seq = edge_step(seq)
        assert seq == want


@given(perms)
def test_compose_identity_and_inverse(p):
    assert perm_compose(IDENTITY, p) == p
    assert perm_compose(p, p.inverse()) == IDENTITY


@given(perms, perms, st.permutations(list(range(7))))
def test_compose_matches_sequential_application(p, q, s):
    assert perm_apply(perm_compose(p, q), s) == perm_apply(p, perm_apply(q, s))


def test_swap_hex_has_order_five():
    step = perm_compose(HEX, SWAP23)
    assert perm_order(step) == 5
    assert perm_order(HEX) == 6


def _sampled_ratio(window, n=400):
    """Independent estimate: dense boundary samples of color-0 hexagons."""
    def boundary(c):
        P = hexagon_vertices(c)
        t = np.linspace(0, 1, n, endpoint=False)[:, None]
        return np.concatenate([P[k] + t * (P[(k + 1) % 6] - P[k]) for k in range(6)])

    base = boundary((0, 0))
    best = math.inf
    for q in range(-window, window + 1):
        for r in range(-window, window + 1):
            if (q, r) != (0, 0) and isbell_color((q, r)) == 0 and abs(to_complex((q, r))) < 4:
                B = boundary((q, r))
                best = min(best, np.min(np.linalg.norm(base[:, None] - B[None], axis=-1)))
    return best / (2 / math.sqrt(3))


def test_separation_ratio_exact():
    assert abs(isbell_separation_ratio(10) - math.sqrt(7) / 2) < 1e-9


def test_separation_ratio_against_sampling():
    assert _sampled_ratio(4) == pytest.approx(math.sqrt(7) / 2, abs=2e-3)


def test_separation_ratio_window_independent():
    assert isbell_separation_ratio(8) == isbell_separation_ratio(20)
    with pytest.raises(ValueError):
        isbell_separation_ratio(3)


@given(st.floats(0.1, 10.0))
def test_hexagon_diameter_scales(spacing):
    P = hexagon_vertices((0, 0), spacing)
    d = np.max(np.linalg.norm(P[:, None] - P[None], axis=-1))
    assert d == pytest.approx(2 * spacing / math.sqrt(3))
