import pytest

from sevensphere.coloring import color_naive
from sevensphere.stitch import (
    DovetailConflict,
    TemplateMismatch,
    align_phase,
    apply_stitches,
    assemble_icovertex,
    default_template,
    icovertex_signature,
    identity_template,
    junction_kinds,
    stitch_groups,
)


def test_no_double_edge_contacts(deformed43):
    assert deformed43.double_edge_contacts() == []


def test_six_unscalable_per_stitch(deformed43):
    groups = [g for g in stitch_groups(deformed43) if len(g) == 3]
    assert len(groups) == 30
    assert len(deformed43.expected_unscalable) == 6 * len(groups)
    for _, upper, lower in groups:
        tiles = set(upper[4]) | set(lower[4])
        assert len(tiles & deformed43.expected_unscalable) == 6


def test_unscalable_tiles_are_expected(deformed43):
    assert set(deformed43.unscalable_tiles()) == set(deformed43.expected_unscalable)


def test_topology_after_surgery(deformed43):
    assert deformed43.euler() == 2
    assert len(deformed43.tile_vertices) == 372


def test_unit_chords_and_arcs(deformed43):
    centres = set(deformed43.arcs.values())
    assert deformed43.unit_chords
    assert all(c in {v for cyc in deformed43.tile_vertices for v in cyc} for c in centres)


def test_symmetric_phase_everywhere(gp43, coloring43):
    assert all(align_phase(gp43, e, g=coloring43) == 0.0 for e in range(30))


def test_junction_kinds_turn_symmetric():
    for n in (2, 4, 6, 8):
        for phase in (0, 1):
            k = junction_kinds(n, phase)
            assert [1 - x for x in reversed(k)] == k
            assert k.count(0) == k.count(1)


def test_template_half_turn_maps_upper_to_lower():
    tmpl = default_template()
    upper, lower = tmpl.junctions
    assert tmpl.involution(0) == 1 and tmpl.involution(1) == 0

    def neg(xy):
        return (-xy[0], -xy[1])

    for key in ("contract", "unscalable"):
        assert {neg(p) for p in upper[key]} == {tuple(p) for p in lower[key]}
    assert {(neg(a), neg(b)) for a, b in upper["arcs"]} == {(tuple(a), tuple(b)) for a, b in lower["arcs"]}


def test_icovertices_clean_and_isomorphic(deformed43):
    sigs = set()
    for c in range(12):
        assert assemble_icovertex(deformed43, c) == []
        sigs.add(icovertex_signature(deformed43, c))
    assert len(sigs) == 1


def test_identity_template_is_noop(gp43, coloring43):
    d = apply_stitches(gp43, coloring43, identity_template())
    assert d.junctions == [] and not d.arcs
    assert len(set(d.vertex_map)) == len(gp43.vertex_pos)


def test_naive_coloring_rejected(gp43):
    g, _ = color_naive(gp43)
    with pytest.raises(TemplateMismatch):
        apply_stitches(gp43, g)
    d = apply_stitches(gp43, g, identity_template())
    with pytest.raises(DovetailConflict):
        assemble_icovertex(d, 0)
