"""Hexagonal lattice algebra, the Isbell 7-coloring and permutations of colors.

Axial coordinates ``(q, r)`` place a hexagon center at ``q + r * exp(-i pi/3)``
in units of the center spacing.  With that embedding the six offsets returned by
:func:`neighbors` are listed counterclockwise, and every 60 degree
counterclockwise turn of the lattice multiplies Isbell colors by 5 (mod 7).
"""

from __future__ import annotations

import cmath
import math
from typing import NamedTuple, Sequence

import numpy as np

NEIGHBOR_OFFSETS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))
R_AXIS = cmath.exp(-1j * math.pi / 3)
OMEGA = cmath.exp(1j * math.pi / 3)


class AxialCoord(NamedTuple):
    q: int
    r: int


class ColorId(int):
    """An integer color in 0..6."""

    def __new__(cls, value: int):
        value = int(value)
        if not 0 <= value <= 6:
            raise ValueError(f"color {value} outside 0..6")
        return super().__new__(cls, value)


class Perm7(tuple):
    """A permutation of the seven colors, stored as its image sequence."""

    def __new__(cls, image: Sequence[int]):
        image = tuple(int(v) for v in image)
        if sorted(image) != list(range(7)):
            raise ValueError(f"not a permutation of 0..6: {image}")
        return super().__new__(cls, image)

    @property
    def image(self) -> tuple:
        return tuple(self)

    def inverse(self) -> "Perm7":
        inv = [0] * 7
        for i, v in enumerate(self):
            inv[v] = i
        return Perm7(inv)


IDENTITY = Perm7(range(7))
SWAP23 = Perm7([0, 1, 3, 2, 4, 5, 6])
HEX = Perm7([0, 3, 6, 2, 5, 1, 4])


def neighbors(c) -> list:
    q, r = c
    return [AxialCoord(q + dq, r + dr) for dq, dr in NEIGHBOR_OFFSETS]


def isbell_color(c) -> ColorId:
    q, r = c
    return ColorId((q + 3 * r) % 7)


def to_complex(c) -> complex:
    """Planar position of an axial coordinate (unit center spacing)."""
    q, r = c
    return q + r * R_AXIS


def from_complex(z: complex) -> AxialCoord:
    """Nearest lattice point to ``z``; exact for lattice positions."""
    r = z.imag / R_AXIS.imag
    q = z.real - r * R_AXIS.real
    qi, ri = round(q), round(r)
    best = min(
        ((qi + dq, ri + dr) for dq in (-1, 0, 1) for dr in (-1, 0, 1)),
        key=lambda c: abs(to_complex(c) - z),
    )
    return AxialCoord(*best)


def _check7(seq):
    if len(seq) != 7:
        raise ValueError(f"expected a sequence of length 7, got {len(seq)}")


def perm_apply(p: Sequence[int], seq: Sequence[int]) -> list:
    """Index composition: ``result[i] = seq[p[i]]``."""
    _check7(seq)
    _check7(p)
    return [seq[p[i]] for i in range(7)]


def perm_compose(p: Sequence[int], q: Sequence[int]) -> Perm7:
    """The permutation equal to applying ``q`` first and then ``p``."""
    return Perm7([q[p[i]] for i in range(7)])


def edge_step(seq: Sequence[int]) -> list:
    return perm_apply(SWAP23, perm_apply(HEX, seq))


def perm_order(p: Sequence[int]) -> int:
    cur, k = Perm7(p), 1
    while cur != IDENTITY:
        cur, k = perm_compose(cur, p), k + 1
    return k


def hexagon_vertices(c, spacing: float = 1.0) -> np.ndarray:
    """Corners of the regular hexagon of the Voronoi cell around ``c``.

    Returns a (6, 2) array; the circumradius is ``spacing / sqrt(3)`` so the
    tile diameter is ``2 * spacing / sqrt(3)``.
    """
    z = to_complex(c) * spacing
    rad = spacing / math.sqrt(3)
    ang = np.pi / 6 + np.pi / 3 * np.arange(6)
    return np.column_stack([z.real + rad * np.cos(ang), z.imag + rad * np.sin(ang)])


def _point_segment(p, a, b):
    d = b - a
    t = np.clip(np.einsum("...i,...i", p - a, d) / np.einsum("...i,...i", d, d), 0.0, 1.0)
    return np.linalg.norm(p - a - t[..., None] * d, axis=-1)


def polygon_distance(pa: np.ndarray, pb: np.ndarray) -> float:
    """Exact distance between two disjoint convex polygons in the plane."""
    best = math.inf
    for P, Q in ((pa, pb), (pb, pa)):
        a = Q
        b = np.roll(Q, -1, axis=0)
        d = _point_segment(P[:, None, :], a[None], b[None])
        best = min(best, float(d.min()))
    return best


def isbell_separation_ratio(window: int) -> float:
    """Closest approach of same-colored Isbell tiles divided by tile diameter."""
    if window < 8:
        raise ValueError("window must be at least 8")
    spacing = 1.0
    diameter = 2 * spacing / math.sqrt(3)
    base = hexagon_vertices((0, 0), spacing)
    best = math.inf
    for q in range(-window, window + 1):
        for r in range(-window, window + 1):
            if (q, r) == (0, 0) or isbell_color((q, r)) != 0:
                continue
            best = min(best, polygon_distance(base, hexagon_vertices((q, r), spacing)))
    if not math.isfinite(best):
        raise ValueError("window contains no same-colored pair")
    return best / diameter
