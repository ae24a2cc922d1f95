import json
import struct

import numpy as np
import pytest

from brdfoverlap.brdf.models import Phong, Ward, default_models
from brdfoverlap.io import (
    SceneError,
    emit_ranking_csv,
    parse_scene,
    read_pfm,
    read_ppm,
    read_volf,
    write_pfm,
    write_ppm,
    write_volf,
)
from brdfoverlap.lattice import FluxLattice
from brdfoverlap.overlap import OverlapConfig, TournamentReport, run_tournament, tournament_scenes
from brdfoverlap.spectral import DomainError
from brdfoverlap.volume import VoxelVolume


def test_pfm_single_pixel_bytes(tmp_path):
    path = tmp_path / "one.pfm"
    write_pfm(FluxLattice(np.ones((1, 1, 3))), path)
    raw = path.read_bytes()
    header = b"PF\n1 1\n-1.0\n"
    assert raw.startswith(header)
    payload = raw[len(header):]
    assert len(payload) == 12
    assert struct.unpack("<3I", payload) == (0x3F800000,) * 3


def test_pfm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    cells = rng.random((7, 5, 3)).astype(np.float32).astype(np.float64)
    path = tmp_path / "lat.pfm"
    write_pfm(FluxLattice(cells), path)
    assert np.array_equal(read_pfm(path).cells, cells)


def test_pfm_rows_bottom_up(tmp_path):
    cells = np.zeros((2, 1, 3))
    cells[0] = 1.0
    path = tmp_path / "rows.pfm"
    write_pfm(cells, path)
    payload = path.read_bytes()[len(b"PF\n1 2\n-1.0\n"):]
    assert np.frombuffer(payload, "<f4").tolist() == [0, 0, 0, 1, 1, 1]


def test_pfm_rejects_empty(tmp_path):
    with pytest.raises(DomainError):
        write_pfm(np.zeros((0, 0, 3)), tmp_path / "empty.pfm")
    with pytest.raises(DomainError):
        FluxLattice(np.zeros((0, 0, 3)))


def test_pfm_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        write_pfm(np.ones((1, 1, 3)), tmp_path / "missing" / "x.pfm")


def test_ppm_round_trip(tmp_path):
    img = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    write_ppm(img, tmp_path / "a.ppm")
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n3 2\n255\n")
    assert np.array_equal(read_ppm(tmp_path / "a.ppm"), img)


def test_volf_layout_and_round_trip(tmp_path):
    v = np.zeros((3, 2, 2))
    v[1, 0, 0] = 0.5
    path = tmp_path / "v.volf"
    write_volf(VoxelVolume(v), path)
    raw = path.read_bytes()
    assert raw[:4] == b"VOLF" and struct.unpack("<3I", raw[4:16]) == (3, 2, 2)
    data = np.frombuffer(raw[16:], "<f4")
    assert data[1] == 0.5 and data.size == 12  # x varies fastest
    assert np.array_equal(read_volf(path).values, v)


def test_volf_rejects_garbage(tmp_path):
    p = tmp_path / "bad.volf"
    p.write_bytes(b"NOPE" + b"\0" * 12)
    with pytest.raises(DomainError):
        read_volf(p)


MINIMAL = {"objects": [{"shape": "sphere", "params": {"radius": 1.0}}],
           "lights": [{"position": [0, 0, 5], "intensity": 10}]}


def test_minimal_scene_uses_default_phong():
    scene = parse_scene(json.dumps(MINIMAL))
    brdf = scene.objects[0].brdf
    assert isinstance(brdf, Phong) and (brdf.n, brdf.ks) == (10.0, 0.8)
    assert scene.render == {"spp": 16, "width": 128, "height": 128, "seed": 0}
    assert np.allclose(scene.lights[0].radiance.as_array(), 10.0)


def test_empty_objects_is_valid():
    scene = parse_scene('{"objects": []}')
    assert scene.objects == () and scene.lights == ()


def test_partial_brdf_override():
    doc = {"objects": [{"shape": "torus", "params": {"major": 2, "minor": 0.5},
                        "brdf": "ward", "brdf_params": {"roughness_x": 0.2}}]}
    w = parse_scene(json.dumps(doc)).objects[0].brdf
    assert isinstance(w, Ward) and (w.roughness_x, w.roughness_y, w.ks) == (0.2, 0.3, 0.05)


@pytest.mark.parametrize("doc,path", [
    ({"objects": [{"shape": "cube"}]}, "$.objects[0].shape"),
    ({"objects": [{"shape": "sphere", "colour": 1}]}, "$.objects[0].colour"),
    ({"lights": [{"intensity": 1}]}, "$.lights[0].position"),
    ({"lights": [{"position": [0, 1]}]}, "$.lights[0].position"),
    ({"sensor": {"width": 0}}, "$.sensor"),
    ({"render": {"samples": 3}}, "$.render.samples"),
    ({"bogus": 1}, "$.bogus"),
])
def test_schema_errors_name_json_path(doc, path):
    with pytest.raises(SceneError) as e:
        parse_scene(json.dumps(doc))
    assert str(e.value).startswith(path)


def test_unknown_brdf_lists_valid_kinds():
    with pytest.raises(SceneError) as e:
        parse_scene(json.dumps({"objects": [{"shape": "sphere", "brdf": "blinn"}]}))
    msg = str(e.value)
    for m in default_models():
        assert m.name in msg


def test_invalid_json():
    with pytest.raises(SceneError):
        parse_scene("{not json")


def flat_lattices(models, nscenes=1):
    cells = np.full((2, 2, 3), 0.5)
    return {(m.name, s): FluxLattice(cells) for m in models for s in range(nscenes)}


def test_ranking_csv_lines_and_ties(tmp_path):
    models = default_models()
    scenes = tournament_scenes((2, 2))[:1]
    report = run_tournament(models, scenes, OverlapConfig(), flat_lattices(models))
    path = tmp_path / "rank.csv"
    emit_ranking_csv(report, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 37
    assert lines[0] == "rank,error,brdf_a,brdf_b,category"
    rows = [l.split(",") for l in lines[1:]]
    assert all(r[1] == "0.000000" for r in rows)
    names = [(r[2], r[3]) for r in rows]
    assert names == sorted(names)


def test_empty_ranking_rejected(tmp_path):
    with pytest.raises(DomainError):
        emit_ranking_csv(TournamentReport([]), tmp_path / "x.csv")
