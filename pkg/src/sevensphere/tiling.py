"""Realized tilings of a sphere and their JSON serialization (format "v1")."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .spheregeom import ArcEdge, TileRegion

FORMAT = "v1"


class TilingFormatError(ValueError):
    pass


@dataclass
class SphericalTiling:
    r: float
    vertices: np.ndarray  # (N, 3)
    tiles: list  # counterclockwise vertex-id cycles
    colors: list
    arcs: dict = field(default_factory=dict)  # frozenset({u, v}) -> center vertex id
    unit_chords: list = field(default_factory=list)
    spec: dict = field(default_factory=dict)
    expected_unscalable: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def edge_list(self):
        """Unique edges as ``(u, v, center or None)`` in first-seen order."""
        seen, out = set(), []
        for cyc in self.tiles:
            n = len(cyc)
            for k in range(n):
                key = frozenset((cyc[k], cyc[(k + 1) % n]))
                if key not in seen:
                    seen.add(key)
                    out.append((cyc[k], cyc[(k + 1) % n], self.arcs.get(key)))
        return out

    def region(self, t: int) -> TileRegion:
        cyc = self.tiles[t]
        n = len(cyc)
        edges = []
        for k in range(n):
            a, b = cyc[k], cyc[(k + 1) % n]
            c = self.arcs.get(frozenset((a, b)))
            if c is None:
                edges.append(ArcEdge("geodesic", self.vertices[a], self.vertices[b], self.r))
            else:
                edges.append(ArcEdge("unit", self.vertices[a], self.vertices[b], self.r, self.vertices[c]))
        return TileRegion(edges, int(self.colors[t]), t)

    def scaled(self, r: float) -> "SphericalTiling":
        V = self.vertices / np.linalg.norm(self.vertices, axis=1)[:, None] * r
        return SphericalTiling(r, V, self.tiles, self.colors, self.arcs, self.unit_chords, dict(self.spec),
                               self.expected_unscalable, dict(self.provenance))

    def with_vertices(self, V) -> "SphericalTiling":
        return SphericalTiling(self.r, np.asarray(V, float), self.tiles, self.colors, self.arcs, self.unit_chords,
                               dict(self.spec), self.expected_unscalable, dict(self.provenance))

    # -- serialization -----------------------------------------------------

    def to_dict(self, annotations: bool = True) -> dict:
        edges = self.edge_list()
        eid = {frozenset((u, v)): i for i, (u, v, _) in enumerate(edges)}
        tiles = []
        for t, cyc in enumerate(self.tiles):
            loop = [eid[frozenset((cyc[k], cyc[(k + 1) % len(cyc)]))] for k in range(len(cyc))]
            tiles.append({"id": t, "color": int(self.colors[t]), "vertices": [int(v) for v in cyc], "edges": loop})
        d = {
            "format": FORMAT,
            "spec": self.spec,
            "radius": float(self.r),
            "vertices": [[float(x) for x in p] for p in self.vertices],
            "edges": [
                {"id": i, "endpoints": [int(u), int(v)], "kind": "geodesic" if c is None else "unit",
                 **({} if c is None else {"center": int(c)})}
                for i, (u, v, c) in enumerate(edges)
            ],
            "tiles": tiles,
            "provenance": self.provenance,
        }
        if annotations:
            d["annotations"] = {
                "unit_chords": [[int(a), int(b)] for a, b in self.unit_chords],
                "expected_unscalable": sorted(int(t) for t in self.expected_unscalable),
            }
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_dict(cls, d: dict) -> "SphericalTiling":
        try:
            if d.get("format") != FORMAT:
                raise TilingFormatError(f"unsupported format {d.get('format')!r}")
            r = float(d["radius"])
            V = np.array(d["vertices"], dtype=float).reshape(-1, 3)
            edges = d["edges"]
            arcs = {}
            for e in edges:
                u, v = e["endpoints"]
                if not (0 <= u < len(V) and 0 <= v < len(V)):
                    raise TilingFormatError(f"edge {e['id']} references a missing vertex")
                if e["kind"] == "unit":
                    arcs[frozenset((u, v))] = int(e["center"])
                elif e["kind"] != "geodesic":
                    raise TilingFormatError(f"unknown edge kind {e['kind']!r}")
            tiles, colors = [], []
            for t in d["tiles"]:
                cyc = [int(v) for v in t["vertices"]]
                for k, ei in enumerate(t["edges"]):
                    a, b = edges[ei]["endpoints"]
                    if {a, b} != {cyc[k], cyc[(k + 1) % len(cyc)]}:
                        raise TilingFormatError(f"tile {t['id']} edge loop does not match its vertices")
                tiles.append(cyc)
                colors.append(int(t["color"]))
            ann = d.get("annotations", {})
            chords = [tuple(x) for x in ann.get("unit_chords", [])]
            unscal = list(ann.get("expected_unscalable", []))
        except (KeyError, TypeError, IndexError) as ex:
            raise TilingFormatError(f"malformed tiling: {ex}") from ex
        norms = np.linalg.norm(V, axis=1)
        if len(V) and np.max(np.abs(norms - r)) > 1e-9 * r:
            raise TilingFormatError("vertices do not lie on the sphere")
        return cls(r, V, tiles, colors, arcs, chords, d.get("spec", {}), unscal, d.get("provenance", {}))

    @classmethod
    def loads(cls, text: str) -> "SphericalTiling":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as ex:
            raise TilingFormatError(str(ex)) from ex
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "SphericalTiling":
        with open(path) as fh:
            return cls.loads(fh.read())


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def provenance(cfg: dict, seed: int) -> dict:
    return {"tool": "sevensphere", "version": __version__, "config_hash": config_hash(cfg), "seed": int(seed)}
