"""Planar icoedge patches for the stitch stretch study.

A patch is the stitched tiling around the middle of one icoedge, unfolded
into the plane of its two icofaces.  Lengths are in lattice units (distance
between neighbouring tile centers) and are scaled by ``a`` when the patch is
realized.  Rows far from the icoedge are plain Isbell hexagons and are held
fixed; the rows around the stitches are free.

The realization places the plane on a sphere of radius ``PLANE_RADIUS`` so
that the sphere optimizer and constraint generator can be reused unchanged.
Chords between points of a patch a few units wide differ from their planar
values by a relative amount of order ``(width / PLANE_RADIUS) ** 2``, far
below every tolerance used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .goldberg import W, edge_frame
from .tiling import SphericalTiling

PLANE_RADIUS = 1.0e4


@dataclass
class Patch:
    m: int
    icoedge: int
    points: np.ndarray  # complex planar positions (lattice units), patch vertex order
    tiles: list  # vertex cycles into ``points``
    colors: list
    arcs: dict
    unit_chords: list
    free: np.ndarray  # boolean mask over vertices
    tile_ids: list  # ids in the deformed tiling
    period: float  # length of one stitch along the icoedge (lattice units)

    def realize(self, a: float) -> SphericalTiling:
        """Scale by ``a`` and lay the patch on the large sphere."""
        z = self.points * a
        P = np.column_stack([np.full(len(z), PLANE_RADIUS), z.real, z.imag])
        P = P / np.linalg.norm(P, axis=1)[:, None] * PLANE_RADIUS
        return SphericalTiling(PLANE_RADIUS, P, [list(c) for c in self.tiles], list(self.colors),
                               dict(self.arcs), list(self.unit_chords),
                               {"m": self.m, "patch": True, "icoedge": self.icoedge, "a": a})


def planar_positions(ct, e: int) -> dict:
    """Edge-frame positions (complex) of the flat vertices lying on the two faces of icoedge ``e``."""
    v = ct.spec.v
    P = (0j, v, v * W)
    f, k = edge_frame(ct, e)
    g = next(x for x in ct.net.edge_faces[e] if x != f)
    kg = ct.net.face_edges[g].index(e)
    X = ct.vertex_pos
    out = {}
    for face, kk, mirror in ((f, k, False), (g, kg, True)):
        C = ct.net.vertices[list(ct.net.faces[face])]
        A = np.column_stack([C[1] - C[0], C[2] - C[0]])
        ab, *_ = np.linalg.lstsq(A, (X - C[0]).T, rcond=None)
        alpha, beta = ab
        resid = np.linalg.norm(A @ ab - (X - C[0]).T, axis=0)
        on = (resid < 1e-9) & (alpha >= -1e-9) & (beta >= -1e-9) & (alpha + beta <= 1 + 1e-9)
        z = v * (alpha + beta * W)
        zf = (z - P[kk]) * W ** (-2 * kk)
        if mirror:
            zf = v - zf
        for i in np.nonzero(on)[0]:
            out.setdefault(int(i), complex(zf[i]))
    return out


def icoedge_patch(d, e: int = 0, periods: float = 1.5, width: float = 6.5, free_width: float = 3.5) -> Patch:
    """Cut the patch around the midpoint of icoedge ``e`` out of a deformed tiling.

    Tiles are kept when their center lies within ``periods`` stitch lengths of
    the midpoint along the icoedge and within ``width`` of the icoedge line.
    Vertices within ``free_width`` of the line are free.
    """
    ct = d.base
    flat = planar_positions(ct, e)
    groups = {}
    for o, s in enumerate(d.vertex_map):
        if o in flat:
            groups.setdefault(int(s), []).append(flat[o])
    pos = {s: complex(np.mean(zs)) for s, zs in groups.items()}
    v = ct.spec.v
    u = v / abs(v)
    period = 2 * abs(2 + W)  # two junctions, one upper and one lower
    half = abs(v) / 2
    keep = []
    for t, cyc in enumerate(d.tile_vertices):
        if not all(x in pos for x in cyc):
            continue
        c = np.mean([pos[x] for x in cyc]) / u
        if abs(c.real - half) <= periods * period and abs(c.imag) <= width:
            keep.append(t)
    kept = set(keep)
    for edge, _, _, _, tids in d.junctions:
        if edge != e and kept & set(tids):
            raise ValueError(f"patch of icoedge {e} reaches a stitch of icoedge {edge}; use a larger m")
    used = sorted({x for t in keep for x in d.tile_vertices[t]})
    idx = {x: i for i, x in enumerate(used)}
    pts = np.array([pos[x] / u - half for x in used])
    tiles = [[idx[x] for x in d.tile_vertices[t]] for t in keep]
    colors = [int(d.colors[t]) for t in keep]
    arcs = {frozenset(idx[x] for x in k): idx[c] for k, c in d.arcs.items() if c in idx and all(x in idx for x in k)}
    chords = [(idx[a], idx[b]) for a, b in d.unit_chords if a in idx and b in idx]
    free = np.abs(pts.imag) <= free_width
    return Patch(ct.spec.family_m or 0, e, pts, tiles, colors, arcs, chords, free, keep, period)
