import pytest

from sevensphere.coloring import (
    color_distributed,
    color_naive,
    combinatorial_conflicts,
    icovertex_cycle,
)
from sevensphere.goldberg import GoldbergSpec, build_goldberg
from sevensphere.hexgrid import IDENTITY, edge_step


def test_one_swap_pair_per_icoedge(gp43, coloring43):
    assert len(coloring43.swap_pairs) == 30
    assert all(len(p) == 2 for p in coloring43.swap_pairs.values())


def test_icovertex_cycles_close(gp43, coloring43):
    for c in range(12):
        assert icovertex_cycle(gp43, coloring43, c) == IDENTITY


def test_icovertex_colors_antipodal(gp43, coloring43):
    vc = coloring43.vertex_color
    assert 0 not in vc
    assert sorted(vc) == sorted(list(range(1, 7)) * 2)
    for v, w in enumerate(gp43.net.antipode):
        assert vc[v] == vc[w]


def test_five_steps_return_anywhere():
    for start in ([0, 1, 2, 3, 4, 5, 6], [3, 1, 4, 0, 5, 2, 6]):
        seq = list(start)
        for _ in range(5):
            seq = edge_step(seq)
        assert seq == start


def test_naive_mismatches(gp43):
    _, rep = color_naive(gp43)
    assert rep.n_mismatched >= 1


def test_naive_on_gp90():
    ct = build_goldberg(GoldbergSpec(9, 0))
    _, rep = color_naive(ct)
    assert rep.n_mismatched >= 1


def test_distributed_conflicts_are_swapped_colors(gp43, coloring43):
    rep = combinatorial_conflicts(gp43, coloring43)
    assert sorted(rep.pairs) == list(range(30))
    for e, pairs in rep.pairs.items():
        # one conflict pair per stitch junction, two junctions per icoedge at m = 1
        assert len(pairs) == 2
        for a, b in pairs:
            assert coloring43.tile_color[a] == coloring43.tile_color[b]
            assert coloring43.tile_color[a] in coloring43.swap_pairs[e]


def test_face_interiors_conflict_free(gp43, coloring43):
    rep = combinatorial_conflicts(gp43, coloring43)
    inner = {t.id for t in gp43.tiles if not t.straddles and len(t.faces) == 1 and not t.near_icovertex}
    for pairs in rep.pairs.values():
        for a, b in pairs:
            assert not (a in inner and b in inner and gp43.tiles[a].faces == gp43.tiles[b].faces)


@pytest.mark.parametrize("gm,gn", [(8, 5), (12, 7)])
def test_distributed_family(gm, gn):
    ct = build_goldberg(GoldbergSpec(gm, gn, gm // 4))
    g = color_distributed(ct)
    assert all(len(p) == 2 for p in g.swap_pairs.values())
    rep = combinatorial_conflicts(ct, g)
    assert all(len(p) == 2 * (gm // 4) for p in rep.pairs.values())
