"""Surgery along icoedges: contracted junctions, unit arcs and stitch phase.

Coordinates in a template are lattice offsets in the frame of an icoedge,
measured from the middle tile ``M`` of an over-close pair ``(M - w^2, M + w^2)``
with ``w = exp(i pi/3)``.  Each over-close pair is resolved by one junction:
the edge between ``M`` and one member of the pair is contracted to a point
where four tiles meet, and three shared edges become unit-circle arcs about
that point.  Junction kinds alternate along the icoedge, so a stitch (one
repeat of the deformation) spans two over-close pairs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .coloring import GlobalColoring, combinatorial_conflicts
from .goldberg import CombinatorialTiling, W, cpx, lattice_of, tile_edge_coords


class TemplateMismatch(RuntimeError):
    pass


class NoSymmetricPhase(RuntimeError):
    pass


class DovetailConflict(RuntimeError):
    def __init__(self, pairs):
        super().__init__(f"dovetail conflicts: {pairs}")
        self.pairs = pairs


@dataclass
class StitchTemplate:
    name: str
    period_hexagons: int
    repeat: tuple
    conflict_offset: tuple
    junctions: list  # dicts with contract / unscalable / arcs offsets
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "StitchTemplate":
        return cls(d["name"], d["period_hexagons"], tuple(d["repeat"]), tuple(d["conflict"]["offset"]),
                   d["junctions"], d)

    @classmethod
    def load(cls, path=None) -> "StitchTemplate":
        if path is None:
            text = resources.files("sevensphere.data").joinpath("stitch_gp4m.json").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return self.raw

    def involution(self, j: int) -> int:
        return 1 - j


def default_template() -> StitchTemplate:
    return StitchTemplate.load()


def identity_template() -> StitchTemplate:
    return StitchTemplate("identity", 7, (2, 1), (0, 0), [], {"name": "identity"})


@dataclass
class DeformedTiling:
    base: CombinatorialTiling
    coloring: GlobalColoring
    tile_vertices: list  # per tile, counterclockwise vertex ids after contraction
    vertex_pos: np.ndarray  # flat positions (merged vertices averaged)
    vertex_map: np.ndarray  # original vertex id -> surviving vertex id
    arcs: dict  # frozenset(vertex pair) -> center vertex id
    unit_chords: list  # (vertex, vertex) pairs at chordal distance exactly 1
    expected_unscalable: set
    junctions: list  # (icoedge, stitch index, kind, junction vertex, tile ids)
    phases: dict  # icoedge -> phase used

    @property
    def colors(self):
        return self.coloring.tile_color

    def n_vertices(self) -> int:
        return len(set(v for t in self.tile_vertices for v in t))

    def edges(self) -> set:
        out = set()
        for cyc in self.tile_vertices:
            n = len(cyc)
            for k in range(n):
                out.add(frozenset((cyc[k], cyc[(k + 1) % n])))
        return out

    def euler(self) -> int:
        return self.n_vertices() - len(self.edges()) + len(self.tile_vertices)

    def contacts(self):
        """Per tile: dict neighbour -> number of shared boundary vertices.

        Two shared vertices mean a shared edge (positive measure); one means a
        point contact.
        """
        at = {}
        for t, cyc in enumerate(self.tile_vertices):
            for v in cyc:
                at.setdefault(v, set()).add(t)
        out = [dict() for _ in self.tile_vertices]
        for v, ts in at.items():
            for a in ts:
                for b in ts:
                    if a != b:
                        out[a][b] = out[a].get(b, 0) + 1
        return out

    def edge_contact(self, a: int, b: int) -> bool:
        ca, cb = self.tile_vertices[a], self.tile_vertices[b]
        ea = {frozenset((ca[k], ca[(k + 1) % len(ca)])) for k in range(len(ca))}
        eb = {frozenset((cb[k], cb[(k + 1) % len(cb)])) for k in range(len(cb))}
        return bool(ea & eb)

    def unscalable_tiles(self) -> dict:
        """Tiles touching two same-colored tiles, mapped to those two tiles."""
        col = self.colors
        out = {}
        for t, nb in enumerate(self.contacts()):
            same = {}
            for u in nb:
                same.setdefault(col[u], []).append(u)
            for c, us in same.items():
                if len(us) >= 2:
                    out[t] = tuple(sorted(us))
        return out

    def double_edge_contacts(self) -> list:
        """Tiles with two same-colored neighbours that both share an edge with them."""
        col = self.colors
        bad = []
        for t, nb in enumerate(self.contacts()):
            same = {}
            for u in nb:
                if self.edge_contact(t, u):
                    same.setdefault(col[u], []).append(u)
            if any(len(v) >= 2 for v in same.values()):
                bad.append(t)
        return bad

    def touching_same_color(self) -> list:
        col = self.colors
        return sorted({tuple(sorted((a, b))) for a, nb in enumerate(self.contacts()) for b in nb if col[a] == col[b]})


class _Walker:
    """Step between hexagons by edge-frame directions, tracking frame rotation."""

    def __init__(self, ct: CombinatorialTiling, e: int):
        self.ct = ct
        self.e = e
        self.start = {}
        for t in ct.tiles:
            xy = tile_edge_coords(ct, e, t.id)
            if xy is not None and t.kind == "hexagon":
                self.start[xy] = t.id
        self.he_of = {}
        for h, (a, b) in enumerate(ct.half_edges.tolist()):
            self.he_of[(int(ct.he_tile[h]), a, b)] = h

    def _rot_home(self, tid):
        """Rotation (power of w) from home-face frame to edge frame for tiles on the icoedge's faces."""
        ct, e = self.ct, self.e
        t = ct.tiles[tid]
        z0 = cpx(t.coord)
        z1 = cpx((t.coord[0] + 1, t.coord[1]))
        a = cpx(tile_edge_coords(ct, e, tid))
        from .goldberg import to_edge_frame

        b = cpx(to_edge_frame(ct, e, t.faces[0], (t.coord[0] + 1, t.coord[1])))
        d = (b - a) / (z1 - z0)
        return round(math.degrees(math.atan2(d.imag, d.real)) / 60) % 6

    def step(self, tid, rot, direction):
        """Neighbour of ``tid`` in edge-frame direction ``w**direction``."""
        ct = self.ct
        t = ct.tiles[tid]
        if t.kind != "hexagon":
            raise TemplateMismatch("walk crosses a pentagon")
        j = (direction - rot) % 6  # local direction w**j
        cyc = t.vertex_ids
        a, b = cyc[(j - 1) % 6], cyc[j]
        h = self.he_of[(tid, a, b)]
        nb = int(ct.he_tile[ct.he_twin[h]])
        tn = ct.tiles[nb]
        if tn.kind != "hexagon":
            return nb, None
        i = tn.vertex_ids.index(b)  # shared edge is nb's edge (i, i+1)
        back_local = (i + 1) % 6
        rot_nb = (direction + 3 - back_local) % 6
        return nb, rot_nb

    def find(self, base_xy, offset):
        """Tile at ``base_xy + offset`` reached by walking from ``base_xy``."""
        tid = self.start[tuple(base_xy)]
        rot = self._rot_home(tid)
        x, y = offset
        steps = []
        # decompose into unit steps along 1, w, w^2 (x + y w with x, y integers)
        steps += [0 if x > 0 else 3] * abs(x)
        steps += [1 if y > 0 else 4] * abs(y)
        # try both orders to avoid pentagons
        for order in (steps, steps[::-1]):
            try:
                cur, r = tid, rot
                for s in order:
                    if r is None:
                        raise TemplateMismatch("walk crosses a pentagon")
                    cur, r = self.step(cur, r, s)
                return cur
            except TemplateMismatch:
                continue
        raise TemplateMismatch(f"cannot reach offset {offset} from {base_xy}")


def _conflict_middles(ct, g, e, tmpl):
    """Edge-frame coordinates of the middle tiles of the over-close pairs on icoedge ``e``."""
    rep = combinatorial_conflicts(ct, g)
    mids = []
    off = cpx(tmpl.conflict_offset)
    for a, b in rep.pairs.get(e, []):
        za = tile_edge_coords(ct, e, a)
        zb = tile_edge_coords(ct, e, b)
        if za is None or zb is None:
            raise TemplateMismatch(f"conflict {(a, b)} not addressable on icoedge {e}")
        d = cpx(zb) - cpx(za)
        if abs(d - off) < 1e-9:
            mids.append(lattice_of((cpx(za) + cpx(zb)) / 2))
        elif abs(d + off) < 1e-9:
            mids.append(lattice_of((cpx(za) + cpx(zb)) / 2))
        else:
            raise TemplateMismatch(f"conflict {(a, b)} on icoedge {e} has offset {d}")
    return sorted(mids, key=lambda xy: (cpx(xy) * cpx(tmpl.repeat).conjugate()).real)


def align_phase(ct: CombinatorialTiling, e: int, tmpl: StitchTemplate | None = None, g=None) -> float:
    """Stitch offset that centres the junction sequence on the icoedge midpoint.

    Returns 0 when a stitch midpoint sits at the icoedge midpoint and 0.5 when
    the midpoint falls between two stitches; which of the two is used is a
    global choice, so this reports the one the midpoint geometry admits.
    """
    tmpl = tmpl or default_template()
    if g is None:
        from .coloring import color_distributed

        g = color_distributed(ct)
    mids = _conflict_middles(ct, g, e, tmpl)
    if not mids:
        return 0.0
    centre = (cpx(mids[0]) + cpx(mids[-1])) / 2
    mid_edge = ct.spec.v / 2
    if abs(centre - mid_edge) > 1e-9:
        raise NoSymmetricPhase(f"icoedge {e}: conflicts are not centred on the midpoint")
    n = len(mids)
    # an even number of junctions can pair symmetrically about the midpoint (a
    # stitch centred there) or leave half stitches at the ends; odd counts put a
    # single junction at the midpoint, which the 180 degree turn maps to the
    # other junction kind and is therefore impossible.
    if n % 2:
        raise NoSymmetricPhase(f"icoedge {e}: odd number of junctions ({n})")
    return 0.0 if (n // 2) % 2 == 1 or n == 2 else 0.5


def junction_kinds(n: int, phase: int) -> list:
    """Kinds (0 = upper, 1 = lower) of ``n`` junctions ordered along an icoedge.

    ``phase`` 0 makes the two junctions either side of the midpoint form one
    stitch (upper then lower); phase 1 swaps them so the midpoint lies between
    two stitches.  Both sequences are reversed-and-swapped onto themselves by
    the 180 degree turn.
    """
    h = n // 2
    return [((h - 1 - i) % 2) ^ phase for i in range(n)]


def apply_stitches(ct: CombinatorialTiling, g: GlobalColoring, tmpl: StitchTemplate | None = None,
                   phase: int = 0) -> DeformedTiling:
    tmpl = tmpl or default_template()
    parent = list(range(len(ct.vertex_pos)))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    pending_arcs = []
    unscal = set()
    junctions = []
    phases = {}
    if tmpl.junctions:
        for e in range(30):
            mids = _conflict_middles(ct, g, e, tmpl)
            walker = _Walker(ct, e)
            kinds = junction_kinds(len(mids), phase)
            phases[e] = phase
            for idx, (M, kind) in enumerate(zip(mids, kinds)):
                J = tmpl.junctions[kind]
                a = walker.find(M, J["contract"][0])
                b = walker.find(M, J["contract"][1])
                shared = set(ct.tiles[a].vertex_ids) & set(ct.tiles[b].vertex_ids)
                if len(shared) != 2:
                    raise TemplateMismatch(f"contracted tiles {a}, {b} do not share an edge")
                u, w = sorted(shared)
                parent[find(w)] = find(u)
                tiles = [walker.find(M, o) for o in J["unscalable"]]
                unscal.update(tiles)
                for p, q in J["arcs"]:
                    pending_arcs.append((walker.find(M, p), walker.find(M, q), u))
                junctions.append((e, idx, kind, u, tuple(tiles)))
    vmap = np.array([find(v) for v in range(len(ct.vertex_pos))])
    groups = {}
    for v, r in enumerate(vmap):
        groups.setdefault(int(r), []).append(v)
    pos = ct.vertex_pos.copy()
    for r, vs in groups.items():
        pos[r] = ct.vertex_pos[vs].mean(axis=0)
    tv = []
    for t in ct.tiles:
        cyc = [int(vmap[v]) for v in t.vertex_ids]
        out = [v for k, v in enumerate(cyc) if v != cyc[k - 1]]
        tv.append(out)
    arcs, chords = {}, []
    for a, b, c in pending_arcs:
        c = int(vmap[c])
        shared = [v for v in tv[a] if v in tv[b]]
        if len(shared) != 2:
            raise TemplateMismatch(f"arc tiles {a}, {b} do not share exactly one edge")
        key = frozenset(shared)
        if key in arcs and arcs[key] != c:
            raise TemplateMismatch(f"edge {tuple(key)} assigned two arc centres")
        arcs[key] = c
        for v in shared:
            chords.append((c, v) if c < v else (v, c))
    d = DeformedTiling(ct, g, tv, pos, vmap, arcs, sorted(set(chords)), unscal, junctions, phases)
    return d


def stitch_groups(d: DeformedTiling) -> list:
    """Group junctions into stitches (consecutive upper/lower pairs) per icoedge."""
    out = []
    by_edge = {}
    for j in d.junctions:
        by_edge.setdefault(j[0], []).append(j)
    for e, js in sorted(by_edge.items()):
        js = sorted(js, key=lambda j: j[1])
        i = 0
        while i < len(js):
            if js[i][2] == 0 and i + 1 < len(js) and js[i + 1][2] == 1:
                out.append((e, js[i], js[i + 1]))
                i += 2
            else:
                out.append((e, js[i]))
                i += 1
    return out


def assemble_icovertex(d: DeformedTiling, c: int) -> list:
    """Check the deformed patch around icovertex ``c``.

    Returns the same-colored tile pairs near the icovertex that the surgery
    does not account for: tiles that touch, tiles that both share an edge with
    a common tile, or point contacts not produced by a junction.  Raises
    :class:`DovetailConflict` when any are found.
    """
    ct = d.base
    pent = next(t.id for t in ct.tiles if t.icovertex == c)
    # tiles within three adjacency steps of the pentagon
    nb = d.contacts()
    region = {pent}
    for _ in range(4):
        region |= {u for t in region for u in nb[t]}
    col = d.colors
    bad = []
    for a in sorted(region):
        for b in nb[a]:
            if col[a] == col[b] and a < b:
                bad.append((a, b))
    for t in sorted(region):
        same = {}
        for u in nb[t]:
            same.setdefault(col[u], []).append(u)
        for us in same.values():
            if len(us) >= 2:
                if len(us) > 2 or t not in d.expected_unscalable:
                    bad.append(tuple(sorted(us)))
                elif d.edge_contact(t, us[0]) and d.edge_contact(t, us[1]):
                    bad.append(tuple(sorted(us)))
    bad = sorted(set(bad))
    if bad:
        raise DovetailConflict(bad)
    return []


def icovertex_signature(d: DeformedTiling, c: int) -> tuple:
    """Shape of the deformed patch around icovertex ``c`` up to relabeling."""
    ct = d.base
    pent = next(t.id for t in ct.tiles if t.icovertex == c)
    nb = d.contacts()
    dist = {pent: 0}
    frontier = [pent]
    for k in range(1, 4):
        nxt = []
        for t in frontier:
            for u in nb[t]:
                if u not in dist:
                    dist[u] = k
                    nxt.append(u)
        frontier = nxt
    sig = sorted((dist[t], len(d.tile_vertices[t]), t in d.expected_unscalable,
                  sum(1 for u in nb[t] if d.colors[u] == d.colors[t])) for t in dist)
    return tuple(sig)
