"""Global 7-colorings of a Goldberg tiling.

Each icoface is colored by ``sigma_f[L(z)]`` where ``L(x + y w) = x + 5y mod 7``
is the Isbell class of a lattice point in the face frame and ``sigma_f`` is a
per-face relabeling of the seven classes.  Across an icoedge the relabeling of
one face either extends the other exactly (naive propagation) or differs from
that extension by one transposition (distributed mismatch).

In the frame of an icoedge (see :func:`goldberg.to_edge_frame`) the transposed
pair is the colors of two Isbell classes ``{x, L(v) - x}``.  For GP(4m, 2m+1)
``L(v) = 5`` and the only such pair that closes around every icovertex is
``{2, 3}``; it is preserved by the 180 degree turn of the icoedge, which maps
class ``c`` to ``L(v) - c``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .goldberg import (
    CombinatorialTiling,
    W,
    cpx,
    edge_frame,
    lattice_color,
    lattice_of,
    to_edge_frame,
)
from .hexgrid import IDENTITY, Perm7

SWAP_CLASSES = (2, 3)


def swap_classes(ct: CombinatorialTiling) -> tuple:
    """Edge-frame class pair transposed across every icoedge of ``ct``."""
    lv = lattice_color(lattice_of(ct.spec.v))
    cands = sorted({tuple(sorted((x, (lv - x) % 7))) for x in range(7) if x != (lv - x) % 7})
    cands.sort(key=lambda p: p != SWAP_CLASSES)
    for pair in cands:
        sig, _ = _propagate(ct, True, pair)
        if all(transfer(ct, e, ct.net.edge_faces[e][0], sig[ct.net.edge_faces[e][0]], True, pair)
               == sig[ct.net.edge_faces[e][1]] for e in range(30)):
            return pair
    raise ClosureFailure("no symmetric transposition closes around the icovertices")


class ClosureFailure(RuntimeError):
    pass


@dataclass
class GlobalColoring:
    face_perm: list  # per icoface Perm7: class -> color
    tile_color: list
    swap_pairs: dict  # icoedge -> frozenset of two colors (empty when sides agree)
    vertex_color: list  # per icovertex


@dataclass
class MismatchReport:
    mismatched_edges: list = field(default_factory=list)
    pairs: dict = field(default_factory=dict)  # icoedge (or "v<k>") -> list of tile pairs

    @property
    def n_mismatched(self) -> int:
        return len(self.mismatched_edges)


def from_edge_frame(ct: CombinatorialTiling, e: int, face: int, xy) -> tuple:
    v = ct.spec.v
    P = (0j, v, v * W)
    f, k = edge_frame(ct, e)
    z = cpx(xy)
    if face == f:
        return lattice_of(z * W ** (2 * k) + P[k])
    kg = ct.net.face_edges[face].index(e)
    return lattice_of((v - z) * W ** (2 * kg) + P[kg])


def _other(ct, e, f):
    a, b = ct.net.edge_faces[e]
    return b if f == a else a


def _edge_classes(ct, e, face):
    """Map edge-frame Isbell class -> class in ``face``'s frame."""
    return {lattice_color(to_edge_frame(ct, e, face, (c, 0))): None for c in range(7)} and {
        lattice_color((c, 0)): lattice_color(from_edge_frame(ct, e, face, (c, 0))) for c in range(7)
    }


def transfer(ct: CombinatorialTiling, e: int, src: int, sigma_src, swap: bool, classes=SWAP_CLASSES) -> Perm7:
    """Per-face relabeling of the face across ``e`` from that of ``src``."""
    dst = _other(ct, e, src)
    ext = {}
    for c in range(7):
        xy_dst = (c, 0)
        xy_src = from_edge_frame(ct, e, src, to_edge_frame(ct, e, dst, xy_dst))
        ext[lattice_color(xy_dst)] = sigma_src[lattice_color(xy_src)]
    if swap:
        cls = _edge_classes(ct, e, src)
        a, b = (sigma_src[cls[k]] for k in classes)
        ext = {k: (b if c == a else a if c == b else c) for k, c in ext.items()}
    return Perm7([ext[k] for k in range(7)])


def _propagate(ct: CombinatorialTiling, swap: bool, classes=SWAP_CLASSES, seed=IDENTITY):
    sig = [None] * 20
    sig[0] = seed
    tree = set()
    q = deque([0])
    while q:
        f = q.popleft()
        for e in ct.net.face_edges[f]:
            g = _other(ct, e, f)
            if sig[g] is None:
                sig[g] = transfer(ct, e, f, sig[f], swap, classes)
                tree.add(e)
                q.append(g)
    return sig, tree


def _tile_colors(ct: CombinatorialTiling, sig) -> list:
    out = []
    for t in ct.tiles:
        out.append(sig[t.faces[0]][lattice_color(t.coord)])
    return out


def _vertex_colors(ct, sig):
    out = []
    for c in range(12):
        cols = set()
        for f in ct.net.vertex_faces[c]:
            P = (0j, ct.spec.v, ct.spec.v * W)[ct.net.faces[f].index(c)]
            cols.add(sig[f][lattice_color(lattice_of(P))])
        out.append(cols.pop() if len(cols) == 1 else None)
    return out


def _edge_disagreement(ct, sig, e):
    f, g = ct.net.edge_faces[e]
    want = transfer(ct, e, f, sig[f], swap=False)
    return {frozenset((want[k], sig[g][k])) for k in range(7) if want[k] != sig[g][k]}


def color_naive(ct: CombinatorialTiling):
    sig, _ = _propagate(ct, swap=False)
    g = GlobalColoring(list(sig), _tile_colors(ct, sig), {}, _vertex_colors(ct, sig))
    rep = combinatorial_conflicts(ct, g)
    for e in range(30):
        d = _edge_disagreement(ct, sig, e)
        g.swap_pairs[e] = frozenset().union(*d) if d else frozenset()
        if d:
            rep.mismatched_edges.append(e)
    return g, rep


def color_distributed(ct: CombinatorialTiling) -> GlobalColoring:
    """Coloring with exactly one transposed color pair across every icoedge.

    The seed relabeling is chosen so that color 0 is the one color carried by
    no icovertex; the other six colors each sit on an antipodal pair.
    """
    classes = swap_classes(ct)
    sig, _ = _propagate(ct, True, classes)
    unused = (set(range(7)) - set(_vertex_colors(ct, sig))).pop()
    relabel = [unused if c == 0 else 0 if c == unused else c for c in range(7)]
    sig, _ = _propagate(ct, True, classes, seed=Perm7([relabel[c] for c in IDENTITY]))
    for e in range(30):
        f, g = ct.net.edge_faces[e]
        if transfer(ct, e, f, sig[f], True, classes) != sig[g]:
            raise ClosureFailure(f"icoedge {e} does not close")
    swaps = {}
    for e in range(30):
        d = _edge_disagreement(ct, sig, e)
        pair = frozenset().union(*d)
        if len(d) != 1 or len(pair) != 2:
            raise ClosureFailure(f"icoedge {e} carries {d}")
        swaps[e] = pair
    vc = _vertex_colors(ct, sig)
    if any(c is None for c in vc):
        raise ClosureFailure("icovertex colors disagree between faces")
    g = GlobalColoring(list(sig), _tile_colors(ct, sig), swaps, vc)
    g.swap_classes = classes
    return g


def icovertex_cycle(ct: CombinatorialTiling, g: GlobalColoring, c: int) -> Perm7:
    """Composite relabeling carried once around icovertex ``c``; identity when closed."""
    faces = ct.net.vertex_faces[c]
    edges = ct.net.vertex_edges[c]
    sig = g.face_perm[faces[0]]
    f = faces[0]
    for _ in range(5):
        # cross the edge shared by f and the next face around c
        nxt = faces[(faces.index(f) + 1) % 5]
        e = next(x for x in ct.net.face_edges[f] if x in ct.net.face_edges[nxt])
        sig = transfer(ct, e, f, sig, bool(g.swap_pairs.get(e)), getattr(g, "swap_classes", SWAP_CLASSES))
        f = nxt
    base = g.face_perm[faces[0]]
    return Perm7([base.inverse()[sig[k]] for k in range(7)])


def _graph_pairs(ct: CombinatorialTiling, colors):
    nb = [set() for _ in ct.tiles]
    tw = ct.he_tile[ct.he_twin]
    for a, b in zip(ct.he_tile.tolist(), tw.tolist()):
        nb[a].add(b)
    out = set()
    for t in range(len(ct.tiles)):
        two = set(nb[t])
        for n in nb[t]:
            two |= nb[n]
        for u in two:
            if u > t and colors[u] == colors[t]:
                out.add((t, u))
    return sorted(out)


def combinatorial_conflicts(ct: CombinatorialTiling, g: GlobalColoring) -> MismatchReport:
    """Same-colored tiles at most two adjacency steps apart, grouped by nearest icoedge."""
    import numpy as np

    rep = MismatchReport()
    P = ct.net.vertices
    mids = np.array([(P[a] + P[b]) / 2 for a, b in ct.net.edges])
    cen = np.array([ct.vertex_pos[list(t.vertex_ids)].mean(0) for t in ct.tiles])
    for a, b in _graph_pairs(ct, g.tile_color):
        c = (cen[a] + cen[b]) / 2
        c /= np.linalg.norm(c)
        # distance to each icoedge great circle segment, approximated by its chord
        best, key = None, None
        for e, (u, w) in enumerate(ct.net.edges):
            A, B = P[u], P[w]
            t = np.clip(np.dot(c - A, B - A) / np.dot(B - A, B - A), 0, 1)
            d = np.linalg.norm(c - A - t * (B - A))
            if best is None or d < best:
                best, key = d, e
        rep.pairs.setdefault(key, []).append((a, b))
    return rep
