"""Icosahedral nets and combinatorial Goldberg polyhedra GP(gm, gn).

Every icoface carries a planar lattice frame.  For a face with corners
``(c0, c1, c2)`` (counterclockwise seen from outside) the frame places ``c0``
at 0, ``c1`` at ``v = gm + gn * w`` and ``c2`` at ``v * w`` where
``w = exp(i pi/3)``.  Lattice points are stored as integer pairs ``(x, y)``
meaning ``x + y * w``; :func:`to_axial` converts them to the axial convention
of :mod:`sevensphere.hexgrid`.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .hexgrid import AxialCoord

W = cmath.exp(1j * math.pi / 3)
CENTROID = (1 + W) / 3
_TOL = 1e-9


class UnknownIcoedge(KeyError):
    pass


def to_axial(xy) -> AxialCoord:
    x, y = xy
    return AxialCoord(x + y, -y)


def from_axial(c) -> tuple:
    q, r = c
    return (q + r, -r)


def lattice_color(xy) -> int:
    """Isbell color of ``x + y w``; equals ``hexgrid.isbell_color`` after conversion."""
    x, y = xy
    return (x + 5 * y) % 7


def cpx(xy) -> complex:
    return xy[0] + xy[1] * W


def lattice_of(z: complex) -> tuple:
    y = z.imag / W.imag
    x = z.real - y * W.real
    xi, yi = round(x), round(y)
    if abs(x - xi) > 1e-6 or abs(y - yi) > 1e-6:
        raise ValueError(f"{z} is not a lattice point")
    return (xi, yi)


@dataclass(frozen=True)
class IcoNet:
    vertices: np.ndarray  # (12, 3) unit vectors
    faces: tuple  # 20 counterclockwise corner triples
    edges: tuple  # 30 sorted vertex pairs
    edge_faces: tuple  # per edge: (f, g) with f < g
    face_edges: tuple  # per face: edge ids opposite nothing; edge k joins corners k and k+1
    vertex_faces: tuple  # per vertex: 5 faces in counterclockwise order
    vertex_edges: tuple  # per vertex: 5 edges in counterclockwise order
    antipode: tuple  # vertex -> antipodal vertex

    def edge_id(self, a: int, b: int) -> int:
        return self.edges.index(tuple(sorted((a, b))))


def build_ico_net() -> IcoNet:
    phi = (1 + math.sqrt(5)) / 2
    pts = []
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            pts += [(0, s1, s2 * phi), (s1, s2 * phi, 0), (s2 * phi, 0, s1)]
    V = np.array(sorted(pts), dtype=float)
    V /= np.linalg.norm(V, axis=1)[:, None]
    d = np.linalg.norm(V[:, None] - V[None], axis=-1)
    edge_len = np.min(d[d > 1e-9])
    adj = np.abs(d - edge_len) < 1e-9
    faces = []
    for a, b, c in itertools.combinations(range(12), 3):
        if adj[a, b] and adj[b, c] and adj[a, c]:
            if np.dot(np.cross(V[b] - V[a], V[c] - V[a]), V[a]) < 0:
                b, c = c, b
            k = min(range(3), key=lambda i: (a, b, c)[i])
            faces.append(tuple((a, b, c)[k:] + (a, b, c)[:k]))
    faces = tuple(sorted(faces))
    edges = tuple(sorted({tuple(sorted((f[k], f[(k + 1) % 3]))) for f in faces for k in range(3)}))
    eidx = {e: i for i, e in enumerate(edges)}
    face_edges = tuple(tuple(eidx[tuple(sorted((f[k], f[(k + 1) % 3])))] for k in range(3)) for f in faces)
    ef = [[] for _ in edges]
    for fi, fe in enumerate(face_edges):
        for e in fe:
            ef[e].append(fi)
    edge_faces = tuple(tuple(sorted(x)) for x in ef)
    vfaces, vedges = [], []
    for v in range(12):
        inc = [fi for fi, f in enumerate(faces) if v in f]
        # order counterclockwise: follow the face whose next corner after v is the previous one's last
        order = [inc[0]]
        while len(order) < 5:
            f = faces[order[-1]]
            k = f.index(v)
            nxt = f[(k + 2) % 3]  # corner before v in ccw order
            for g in inc:
                if g not in order and faces[g][(faces[g].index(v) + 1) % 3] == nxt:
                    order.append(g)
                    break
        k0 = order.index(min(order))
        order = order[k0:] + order[:k0]
        vfaces.append(tuple(order))
        vedges.append(tuple(eidx[tuple(sorted((v, faces[g][(faces[g].index(v) + 1) % 3])))] for g in order))
    anti = tuple(int(np.argmin(np.linalg.norm(V + V[i], axis=1))) for i in range(12))
    return IcoNet(V, faces, edges, edge_faces, face_edges, tuple(vfaces), tuple(vedges), anti)


@dataclass(frozen=True)
class GoldbergSpec:
    gm: int
    gn: int
    family_m: int | None = None

    def __post_init__(self):
        if self.gm < 0 or self.gn < 0 or (self.gm, self.gn) == (0, 0):
            raise ValueError(f"invalid Goldberg parameters {(self.gm, self.gn)}")

    @property
    def T(self) -> int:
        return self.gm * self.gm + self.gm * self.gn + self.gn * self.gn

    @property
    def v(self) -> complex:
        return self.gm + self.gn * W


def family_spec(m: int) -> GoldbergSpec:
    if m < 1:
        raise ValueError("m must be at least 1")
    return GoldbergSpec(4 * m, 2 * m + 1, m)


@dataclass
class Tile:
    id: int
    kind: str  # "hexagon" or "pentagon"
    faces: tuple  # home icoface(s); pentagons list all five
    coord: tuple  # lattice (x, y) in the first home face's frame
    vertex_ids: tuple  # counterclockwise boundary vertices
    icovertex: int | None = None
    straddles: tuple = ()  # icoedges whose line the tile crosses
    near_icovertex: bool = False


@dataclass
class CombinatorialTiling:
    spec: GoldbergSpec
    net: IcoNet
    tiles: list
    vertex_pos: np.ndarray  # positions on the flat unit-circumradius icosahedron
    half_edges: np.ndarray  # (H, 2) tail/head vertex ids
    he_tile: np.ndarray
    he_next: np.ndarray
    he_twin: np.ndarray
    lookup: dict = field(default_factory=dict)  # (face, (x, y)) -> tile id

    @property
    def n_pentagons(self) -> int:
        return sum(t.kind == "pentagon" for t in self.tiles)

    @property
    def n_hexagons(self) -> int:
        return sum(t.kind == "hexagon" for t in self.tiles)

    def euler(self) -> int:
        return len(self.vertex_pos) - len(self.half_edges) // 2 + len(self.tiles)

    def tile_neighbors(self, tid: int) -> list:
        out = []
        for h in np.nonzero(self.he_tile == tid)[0]:
            out.append(int(self.he_tile[self.he_twin[h]]))
        return out


class _Frames:
    """Affine maps between face lattice frames and the flat icosahedron."""

    def __init__(self, net: IcoNet, spec: GoldbergSpec):
        self.net, self.spec = net, spec
        v = spec.v
        self.P = (0j, v, v * W)

    def face_point(self, f: int, z: complex) -> np.ndarray:
        a, b = self._ab(z)
        C = self.net.vertices[list(self.net.faces[f])]
        return C[0] + a * (C[1] - C[0]) + b * (C[2] - C[0])

    def _ab(self, z: complex):
        u = z / self.spec.v
        b = u.imag / W.imag
        return u.real - b * W.real, b

    def bary(self, z: complex):
        a, b = self._ab(z)
        return 1 - a - b, a, b

    def locate(self, f: int, z: complex) -> np.ndarray:
        """3D position of a planar point given in face ``f``'s frame.

        Points within the face use its own map; points slightly outside are
        carried across the nearest crossed icoedge by unfolding.
        """
        bc = self.bary(z)
        if min(bc) >= -_TOL:
            return self.face_point(f, z)
        k = int(np.argmin(bc))  # corner opposite the crossed edge
        i, j = (k + 1) % 3, (k + 2) % 3
        face = self.net.faces[f]
        ci, cj = face[i], face[j]
        g = next(x for x in self.net.edge_faces[self.net.edge_id(ci, cj)] if x != f)
        third = next(c for c in self.net.faces[g] if c not in (ci, cj))
        Pi, Pj = self.P[i], self.P[j]
        Pk = Pi + Pj - self.P[k]  # reflection of the opposite corner (parallelogram)
        # barycentric coordinates in the unfolded triangle (Pi, Pj, Pk)
        M = np.array([[Pi.real, Pj.real, Pk.real], [Pi.imag, Pj.imag, Pk.imag], [1, 1, 1]])
        lam = np.linalg.solve(M, np.array([z.real, z.imag, 1.0]))
        if lam.min() < -1e-6:
            raise ValueError("point too far outside its face to unfold")
        V = self.net.vertices
        return lam[0] * V[ci] + lam[1] * V[cj] + lam[2] * V[third]


def _inside(bc) -> bool:
    return min(bc) >= -_TOL


def build_goldberg(spec: GoldbergSpec, net: IcoNet | None = None) -> CombinatorialTiling:
    net = net or build_ico_net()
    fr = _Frames(net, spec)
    v = spec.v
    R = int(abs(v)) + 2
    keys: dict = {}
    pos: list = []

    def vid(p):
        key = tuple(np.round(p * 1e7).astype(np.int64))
        if key not in keys:
            keys[key] = len(pos)
            pos.append(p)
        return keys[key]

    tiles: list = []
    seen3d: dict = {}
    lookup: dict = {}
    for f in range(20):
        pts = []
        for x in range(-R, 2 * R):
            for y in range(-R, 2 * R):
                z = x + y * W
                bc = fr.bary(z)
                if not _inside(bc) or max(bc) > 1 - 1e-9:
                    continue
                pts.append((x, y))
        for xy in sorted(pts):
            z = cpx(xy)
            c3 = fr.face_point(f, z)
            key = tuple(np.round(c3 * 1e7).astype(np.int64))
            if key in seen3d:  # lattice point on an icoedge, owned by the lower face
                lookup[(f, xy)] = seen3d[key]
                continue
            ring = [fr.locate(f, z + CENTROID * W**k) for k in range(6)]
            tid = len(tiles)
            straddle = set()
            bc0 = fr.bary(z)
            on_edge = min(bc0) < 1e-9
            tiles.append(Tile(tid, "hexagon", (f,), xy, tuple(vid(p) for p in ring)))
            seen3d[key] = tid
            lookup[(f, xy)] = tid
            if on_edge:
                tiles[-1].faces = (f,)
    # pentagons at icovertices
    for c in range(12):
        ring = []
        for f in net.vertex_faces[c]:
            i = net.faces[f].index(c)
            P = fr.P[i]
            cand = [P + CENTROID * W**k for k in range(6)]
            for z in cand:
                if _inside(fr.bary(z)):
                    ring.append(fr.face_point(f, z))
        # order counterclockwise around the outward axis and drop duplicates
        axis = net.vertices[c]
        e1 = np.cross(axis, [0.3, 0.5, 0.7])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(axis, e1)
        ids = sorted({vid(p) for p in ring}, key=lambda i: math.atan2(pos[i] @ e2, pos[i] @ e1))
        tid = len(tiles)
        faces = net.vertex_faces[c]
        xy = lattice_of(fr.P[net.faces[faces[0]].index(c)])
        tiles.append(Tile(tid, "pentagon", faces, xy, tuple(ids), icovertex=c))
        for f in faces:
            lookup[(f, lattice_of(fr.P[net.faces[f].index(c)]))] = tid
    vertex_pos = np.array(pos)
    he, het, hen = [], [], []
    for t in tiles:
        n = len(t.vertex_ids)
        base = len(he)
        for k in range(n):
            he.append((t.vertex_ids[k], t.vertex_ids[(k + 1) % n]))
            het.append(t.id)
            hen.append(base + (k + 1) % n)
    he = np.array(he)
    index = {tuple(h): i for i, h in enumerate(he.tolist())}
    twin = np.array([index.get((b, a), -1) for a, b in he.tolist()])
    if (twin < 0).any():
        raise RuntimeError("surface is not closed")
    ct = CombinatorialTiling(spec, net, tiles, vertex_pos, he, np.array(het), np.array(hen), twin, lookup)
    _tag(ct, fr)
    return ct


def _tag(ct: CombinatorialTiling, fr: _Frames):
    pent = {t.id for t in ct.tiles if t.kind == "pentagon"}
    for t in ct.tiles:
        if t.kind == "pentagon":
            continue
        nb = ct.tile_neighbors(t.id)
        t.near_icovertex = any(n in pent for n in nb)
        f = t.faces[0]
        z = cpx(t.coord)
        crossed = []
        for k in range(6):
            bc = fr.bary(z + CENTROID * W**k)
            if min(bc) < -_TOL:
                j = int(np.argmin(bc))
                face = ct.net.faces[f]
                crossed.append(ct.net.edge_id(face[(j + 1) % 3], face[(j + 2) % 3]))
        t.straddles = tuple(sorted(set(crossed)))


def edge_frame(ct: CombinatorialTiling, e: int):
    """Return ``(f, k)`` such that icoedge ``e`` runs from corner ``k`` to ``k+1`` of face ``f``.

    ``f`` is the lower-numbered of the two faces sharing the icoedge.
    """
    if not 0 <= e < 30:
        raise UnknownIcoedge(e)
    f = ct.net.edge_faces[e][0]
    k = ct.net.face_edges[f].index(e)
    return f, k


def to_edge_frame(ct: CombinatorialTiling, e: int, face: int, xy) -> tuple:
    """Lattice coordinates of ``xy`` (in ``face``'s frame) in the frame of icoedge ``e``.

    In the edge frame the icoedge runs from 0 to ``v``; the lower face lies to
    the left (positive side) of that segment.
    """
    v = ct.spec.v
    P = (0j, v, v * W)
    f, k = edge_frame(ct, e)
    z = cpx(xy)
    if face == f:
        return lattice_of((z - P[k]) * W ** (-2 * k))
    g = next(x for x in ct.net.edge_faces[e] if x != f)
    if face != g:
        raise ValueError("face does not border the icoedge")
    kg = ct.net.face_edges[g].index(e)
    return lattice_of(v - (z - P[kg]) * W ** (-2 * kg))


def tile_edge_coords(ct: CombinatorialTiling, e: int, tid: int) -> tuple:
    t = ct.tiles[tid]
    fs = ct.net.edge_faces[e]
    if t.kind == "pentagon":
        f, k = edge_frame(ct, e)
        a, b = ct.net.faces[f][k], ct.net.faces[f][(k + 1) % 3]
        return (0, 0) if t.icovertex == a else lattice_of(ct.spec.v) if t.icovertex == b else None
    if t.faces[0] in fs:
        return to_edge_frame(ct, e, t.faces[0], t.coord)
    return None


def icoedge_tiles(ct: CombinatorialTiling, e: int) -> list:
    """Tiles whose closed hexagon meets icoedge ``e``, ordered from one end to the other.

    Each entry is ``(tile id, side)`` where side is ``+1`` for the lower face,
    ``-1`` for the other face and ``0`` for the two end pentagons.
    """
    if not 0 <= e < 30:
        raise UnknownIcoedge(e)
    v = ct.spec.v
    u = v / abs(v)
    reach = 1 / math.sqrt(3) + 1e-9
    out = []
    for t in ct.tiles:
        xy = tile_edge_coords(ct, e, t.id)
        if xy is None:
            continue
        z = cpx(xy) / u
        along, perp = z.real, z.imag
        if -1e-9 <= along <= abs(v) + 1e-9 and abs(perp) <= reach * (1 if t.kind == "hexagon" else 0) + 1e-9:
            side = 0 if t.kind == "pentagon" else (1 if perp > 0 else -1)
            out.append((along, t.id, side))
    out.sort()
    return [(tid, side) for _, tid, side in out]


def icoedge_signature(ct: CombinatorialTiling, e: int) -> tuple:
    """Tile-independent description of an icoedge neighbourhood used to compare icoedges."""
    return tuple((tile_edge_coords(ct, e, tid), side) for tid, side in icoedge_tiles(ct, e))
