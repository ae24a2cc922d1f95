"""File formats (PFM, PPM, VOLF), scene JSON parsing and the ranking CSV."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .brdf.models import make_model
from .lattice import FluxLattice
from .scene import SHAPES, Light, Scene, Sensor, Transform
from .spectral import DomainError, SpectralSample
from .volume import VoxelVolume


class SceneError(ValueError):
    """Schema violation in a scene document; the message starts with the JSON path."""


# --- images -----------------------------------------------------------------

def write_pfm(lattice, path) -> None:
    """Little-endian colour PFM, rows stored bottom-up."""
    cells = lattice.cells if isinstance(lattice, FluxLattice) else np.asarray(lattice, float)
    if cells.ndim == 2:
        cells = cells[..., None]
    if cells.ndim != 3 or cells.shape[0] == 0 or cells.shape[1] == 0:
        raise DomainError("PFM needs a non-empty (m, n, bands) lattice")
    if cells.shape[2] == 1:
        cells = np.repeat(cells, 3, axis=2)
    h, w = cells.shape[:2]
    data = np.ascontiguousarray(cells[::-1, :, :3], dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(f"PF\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pfm(path) -> FluxLattice:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic not in (b"PF", b"Pf"):
            raise DomainError(f"not a PFM file: {path}")
        w, h = (int(x) for x in fh.readline().split())
        scale = float(fh.readline())
        bands = 3 if magic == b"PF" else 1
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(w * h * bands * 4), dtype=dtype).reshape(h, w, bands)
    return FluxLattice(data[::-1].astype(np.float64))


def write_ppm(image: np.ndarray, path) -> None:
    """Binary P6 from an 8-bit ``(h, w, 3)`` array."""
    img = np.asarray(image)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise DomainError("PPM needs an (h, w, 3) uint8 image")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P6":
        raise DomainError(f"not a P6 file: {path}")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise DomainError("only 8-bit PPM is supported")
    return np.frombuffer(parts[4][: w * h * 3], dtype=np.uint8).reshape(h, w, 3)


# --- volumes ----------------------------------------------------------------

VOLF_MAGIC = b"VOLF"


def write_volf(vol, path) -> None:
    """``VOLF`` + u32 nx, ny, nz (little-endian) + float32 densities, x fastest."""
    values = vol.values if isinstance(vol, VoxelVolume) else np.asarray(vol)
    nx, ny, nz = values.shape
    with open(path, "wb") as fh:
        fh.write(VOLF_MAGIC + struct.pack("<3I", nx, ny, nz))
        fh.write(np.asarray(values, dtype="<f4").transpose(2, 1, 0).tobytes())


def read_volf(path) -> VoxelVolume:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != VOLF_MAGIC:
            raise DomainError(f"not a VOLF file: {path}")
        nx, ny, nz = struct.unpack("<3I", head[4:])
        data = np.frombuffer(fh.read(nx * ny * nz * 4), dtype="<f4")
    if data.size != nx * ny * nz:
        raise DomainError("truncated VOLF payload")
    return VoxelVolume(data.reshape(nz, ny, nx).transpose(2, 1, 0).astype(np.float64))


# --- scene documents --------------------------------------------------------

_OBJECT_KEYS = {"shape", "params", "transform", "brdf", "brdf_params"}
_LIGHT_KEYS = {"position", "radiance", "intensity", "area", "normal"}
_SENSOR_KEYS = {"origin", "look_at", "up", "fov_deg", "width", "height"}
_RENDER_KEYS = {"spp", "width", "height", "seed"}
_TOP_KEYS = {"objects", "lights", "sensor", "render", "diffuse_albedo", "name"}
RENDER_DEFAULTS = {"spp": 16, "width": 128, "height": 128, "seed": 0}


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise SceneError(f"{path}: expected an object")
    for k in obj:
        if k not in allowed:
            raise SceneError(f"{path}.{k}: unknown key (allowed: {', '.join(sorted(allowed))})")


def _vec(x, path, n=3):
    try:
        v = tuple(float(a) for a in x)
    except (TypeError, ValueError):
        raise SceneError(f"{path}: expected {n} numbers") from None
    if len(v) != n:
        raise SceneError(f"{path}: expected {n} numbers, got {len(v)}")
    return v


def _spectral(x, path):
    if isinstance(x, (int, float)):
        return SpectralSample.gray(float(x))
    return SpectralSample(*_vec(x, path))


def parse_scene(text: str) -> Scene:
    """Scene from a JSON document; BRDF parameters default to the standard table."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"$: invalid JSON ({e})") from None
    _check_keys(doc, _TOP_KEYS, "$")
    objects = []
    for i, o in enumerate(doc.get("objects", [])):
        path = f"$.objects[{i}]"
        _check_keys(o, _OBJECT_KEYS, path)
        shape = o.get("shape")
        if shape not in SHAPES:
            raise SceneError(f"{path}.shape: unknown shape {shape!r} (valid: {', '.join(SHAPES)})")
        try:
            model = make_model(o.get("brdf", "phong"), **o.get("brdf_params", {}))
        except KeyError as e:
            raise SceneError(f"{path}.brdf: {e.args[0]}") from None
        tr = o.get("transform", {})
        _check_keys(tr, {"translation", "rotation_deg"}, f"{path}.transform")
        transform = Transform(_vec(tr.get("translation", (0, 0, 0)), f"{path}.transform.translation"),
                              _vec(tr.get("rotation_deg", (0, 0, 0)), f"{path}.transform.rotation_deg"))
        params = dict(o.get("params", {}))
        for key in ("radii",):
            if key in params:
                params[key] = _vec(params[key], f"{path}.params.{key}")
        try:
            objects.append(SHAPES[shape](brdf=model, transform=transform, **params))
        except TypeError as e:
            raise SceneError(f"{path}.params: {e}") from None
    lights = []
    for i, l in enumerate(doc.get("lights", [])):
        path = f"$.lights[{i}]"
        _check_keys(l, _LIGHT_KEYS, path)
        if "position" not in l:
            raise SceneError(f"{path}.position: required")
        value = l.get("radiance", l.get("intensity", 1.0))
        rad = _spectral(value, f"{path}.radiance")
        if not rad.is_nonnegative():
            raise SceneError(f"{path}.radiance: must be >= 0 per band")
        lights.append(Light(_vec(l["position"], f"{path}.position"), rad, float(l.get("area", 0.0)),
                            _vec(l.get("normal", (0, 0, -1)), f"{path}.normal")))
    render = dict(RENDER_DEFAULTS)
    r = doc.get("render", {})
    _check_keys(r, _RENDER_KEYS, "$.render")
    render.update({k: int(v) for k, v in r.items()})
    s = doc.get("sensor", {})
    _check_keys(s, _SENSOR_KEYS, "$.sensor")
    sensor = Sensor(
        origin=_vec(s.get("origin", (0, 0, 6)), "$.sensor.origin"),
        look_at=_vec(s.get("look_at", (0, 0, 0)), "$.sensor.look_at"),
        up=_vec(s.get("up", (0, 1, 0)), "$.sensor.up"),
        fov_deg=float(s.get("fov_deg", 35.0)),
        width=int(s.get("width", render["width"])),
        height=int(s.get("height", render["height"])),
    )
    if sensor.width < 1 or sensor.height < 1:
        raise SceneError("$.sensor: width and height must be >= 1")
    return Scene(tuple(objects), tuple(lights), sensor, float(doc.get("diffuse_albedo", 0.2)),
                 str(doc.get("name", "scene")), render)


def load_scene(path) -> Scene:
    return parse_scene(Path(path).read_text())


# --- reports ----------------------------------------------------------------

RANKING_HEADER = ("rank", "error", "brdf_a", "brdf_b", "category")


def emit_ranking_csv(report, path) -> None:
    if not report.rows:
        raise DomainError("cannot write an empty ranking")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RANKING_HEADER)
        for r in report.rows:
            w.writerow([r.rank, f"{r.error:.6f}", r.brdf_a, r.brdf_b, r.category])
