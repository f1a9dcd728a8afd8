import json
from importlib import resources

import numpy as np
import pytest

from sevensphere import fixtures
from sevensphere.tiling import SphericalTiling, TilingFormatError, config_hash

NAMES = ["cube_r0.60", "dodecahedron_r0.62", "octahedron_r0.7071", "icoedge_patch_m5"]


def shipped_text(name):
    return resources.files("sevensphere.data").joinpath("fixtures", f"{name}.json").read_text()


@pytest.mark.parametrize("name", NAMES)
def test_shipped_files_round_trip_byte_identical(name):
    text = shipped_text(name)
    assert SphericalTiling.loads(text).dumps() == text


def test_platonic_fixtures_regenerate_identically():
    for name, t in fixtures.platonic().items():
        assert t.dumps() == shipped_text(name), name


@pytest.mark.slow
def test_patch_fixture_regenerates_identically():
    assert fixtures.icoedge_patch_tiling().dumps() == shipped_text("icoedge_patch_m5")


def test_round_trip_keeps_arcs_and_annotations(tiling43):
    t = SphericalTiling.loads(tiling43.dumps())
    assert t.arcs == tiling43.arcs
    assert t.tiles == tiling43.tiles and t.colors == tiling43.colors
    assert sorted(t.expected_unscalable) == sorted(tiling43.expected_unscalable)
    assert [tuple(c) for c in t.unit_chords] == [tuple(c) for c in tiling43.unit_chords]
    assert np.array_equal(t.vertices, tiling43.vertices)


def test_edges_are_shared_not_duplicated(tiling43):
    d = tiling43.to_dict()
    keys = [frozenset(e["endpoints"]) for e in d["edges"]]
    assert len(keys) == len(set(keys))
    # closed surface: V - E + F = 2
    assert len(d["vertices"]) - len(d["edges"]) + len(d["tiles"]) == 2


def _cube():
    return json.loads(shipped_text("cube_r0.60"))


@pytest.mark.parametrize("breaks", [
    lambda d: d.update(format="v0"),
    lambda d: d.pop("radius"),
    lambda d: d["edges"][0].update(kind="spiral"),
    lambda d: d["edges"][0].update(endpoints=[0, 999]),
    lambda d: d["tiles"][0]["edges"].reverse(),
    lambda d: d["vertices"][0].__setitem__(0, d["vertices"][0][0] + 0.1),
    lambda d: d["tiles"][0].pop("color"),
])
def test_malformed_inputs_rejected(breaks):
    d = _cube()
    breaks(d)
    with pytest.raises(TilingFormatError):
        SphericalTiling.from_dict(d)


def test_not_json_rejected():
    with pytest.raises(TilingFormatError):
        SphericalTiling.loads("{not json")


def test_scaled_keeps_vertices_on_new_sphere():
    t = fixtures.load("cube_r0.60").scaled(0.55)
    assert np.allclose(np.linalg.norm(t.vertices, axis=1), 0.55)


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
