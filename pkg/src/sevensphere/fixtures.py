"""Canonical fixture tilings shipped as TilingFiles under ``sevensphere/data/fixtures``.

``python -m sevensphere.fixtures DIR`` regenerates them.
"""

from __future__ import annotations

import math
import sys
from importlib import resources
from pathlib import Path

from .tiling import SphericalTiling

PATCH_M = 5
PATCH_SCALE = 0.8


def platonic() -> dict:
    from .verify import build_platonic_fixture

    return {
        "octahedron_r0.7071": build_platonic_fixture("octahedron", math.sqrt(0.5)),
        "cube_r0.60": build_platonic_fixture("cube", 0.60),
        "dodecahedron_r0.62": build_platonic_fixture("dodecahedron", 0.62),
    }


def icoedge_patch_tiling(m: int = PATCH_M, a: float = PATCH_SCALE) -> SphericalTiling:
    """The stitched region around one icoedge midpoint, at lattice scale ``a``."""
    from .coloring import color_distributed
    from .goldberg import build_goldberg, family_spec
    from .stitch import apply_stitches
    from .strip import icoedge_patch

    ct = build_goldberg(family_spec(m))
    d = apply_stitches(ct, color_distributed(ct))
    patch = icoedge_patch(d)
    t = patch.realize(a)
    t.expected_unscalable = sorted(i for i, k in enumerate(patch.tile_ids) if k in d.expected_unscalable)
    return t


def canonical() -> dict:
    out = platonic()
    out[f"icoedge_patch_m{PATCH_M}"] = icoedge_patch_tiling()
    return out


def load(name: str) -> SphericalTiling:
    text = resources.files("sevensphere.data").joinpath("fixtures", f"{name}.json").read_text()
    return SphericalTiling.loads(text)


def write_all(directory) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for name, t in canonical().items():
        t.save(directory / f"{name}.json")
        names.append(name)
    return names


if __name__ == "__main__":
    for n in write_all(sys.argv[1] if len(sys.argv) > 1 else "."):
        print(n)
