"""Implicit-surface ray tracing, light sources and direct specular transport.

Transport is single bounce: camera -> surface -> light. Every operation has
a vectorised form working on ``(N, 3)`` arrays; the scalar helpers
(:func:`raycast`, :func:`visibility`, :func:`direct_radiance`) wrap them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .brdf.models import BrdfModel, Phong
from .spectral import DomainError, LocalFrame, SpectralSample, build_frames, normalize

T_MIN = 1e-6  # self-intersection epsilon on ray parameters
SURFACE_TOL = 1e-7
SHADOW_OFFSET = 1e-5
DEFAULT_DIFFUSE = 0.2
TANGENT_AXIS = (1.0, 0.0, 0.0)


def rotation_from_euler(degrees: Sequence[float]) -> np.ndarray:
    """``Rz @ Ry @ Rx`` for angles in degrees."""
    rx, ry, rz = (math.radians(a) for a in degrees)
    cx, sx, cy, sy, cz, sz = math.cos(rx), math.sin(rx), math.cos(ry), math.sin(ry), math.cos(rz), math.sin(rz)
    mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return mz @ my @ mx


@dataclass(frozen=True)
class Transform:
    """Rigid placement ``world = R @ local + translation``."""

    translation: tuple = (0.0, 0.0, 0.0)
    rotation_deg: tuple = (0.0, 0.0, 0.0)

    @property
    def matrix(self) -> np.ndarray:
        return rotation_from_euler(self.rotation_deg)

    def to_local(self, origins, dirs):
        r = self.matrix
        return (np.asarray(origins) - np.asarray(self.translation)) @ r, np.asarray(dirs) @ r

    def normal_to_world(self, n):
        return n @ self.matrix.T


@dataclass(frozen=True)
class ImplicitSurface:
    """Base for closed implicit primitives ``F(p) = 0`` with ``F < 0`` inside."""

    brdf: BrdfModel = field(default_factory=Phong)
    transform: Transform = field(default_factory=Transform)

    kind = "implicit"

    def implicit(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def intersect_local(self, o: np.ndarray, d: np.ndarray, t_min: float) -> np.ndarray:
        raise NotImplementedError

    def intersect(self, origins, dirs, t_min: float = T_MIN) -> np.ndarray:
        o, d = self.transform.to_local(origins, dirs)
        return self.intersect_local(np.atleast_2d(o), np.atleast_2d(d), t_min)

    def world_normals(self, points) -> np.ndarray:
        p, _ = self.transform.to_local(points, np.zeros_like(points))
        return normalize(self.transform.normal_to_world(self.gradient(np.atleast_2d(p))))


def _quadratic_hits(b, c, t_min):
    """Smallest root of ``t^2 + 2 b t + c`` above ``t_min``; ``inf`` when none."""
    disc = b * b - c
    out = np.full(b.shape, np.inf)
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    first = ok & (t0 > t_min)
    out[first] = t0[first]
    second = ok & ~first & (t1 > t_min)
    out[second] = t1[second]
    return out


@dataclass(frozen=True)
class Sphere(ImplicitSurface):
    radius: float = 1.0

    kind = "sphere"

    def implicit(self, p):
        return np.sum(p * p, axis=-1) - self.radius**2

    def gradient(self, p):
        return 2.0 * p

    def intersect_local(self, o, d, t_min):
        b = np.sum(o * d, axis=-1)
        c = np.sum(o * o, axis=-1) - self.radius**2
        return _quadratic_hits(b, c, t_min)


@dataclass(frozen=True)
class Ellipsoid(ImplicitSurface):
    radii: tuple = (1.0, 0.5, 0.5)

    kind = "ellipsoid"

    def implicit(self, p):
        return np.sum((p / np.asarray(self.radii)) ** 2, axis=-1) - 1.0

    def gradient(self, p):
        r = np.asarray(self.radii)
        return 2.0 * p / (r * r)

    def intersect_local(self, o, d, t_min):
        r = np.asarray(self.radii)
        os_, ds = o / r, d / r
        a = np.sum(ds * ds, axis=-1)
        b = np.sum(os_ * ds, axis=-1) / a
        c = (np.sum(os_ * os_, axis=-1) - 1.0) / a
        return _quadratic_hits(b, c, t_min)


@dataclass(frozen=True)
class Torus(ImplicitSurface):
    """Torus around the local ``z`` axis, found by sphere tracing its exact distance field."""

    major: float = 1.0
    minor: float = 0.5
    max_steps: int = 2000

    kind = "torus"

    def implicit(self, p):
        s = np.sum(p * p, axis=-1) + self.major**2 - self.minor**2
        return s * s - 4.0 * self.major**2 * (p[..., 0] ** 2 + p[..., 1] ** 2)

    def gradient(self, p):
        s = np.sum(p * p, axis=-1) + self.major**2 - self.minor**2
        g = 4.0 * s[..., None] * p
        g[..., 0] -= 8.0 * self.major**2 * p[..., 0]
        g[..., 1] -= 8.0 * self.major**2 * p[..., 1]
        return g

    def distance(self, p):
        q = np.hypot(p[..., 0], p[..., 1]) - self.major
        return np.hypot(q, p[..., 2]) - self.minor

    def intersect_local(self, o, d, t_min):
        n = o.shape[0]
        out = np.full(n, np.inf)
        bound = self.major + self.minor
        b = np.sum(o * d, axis=-1)
        c = np.sum(o * o, axis=-1) - (bound * 1.001) ** 2
        disc = b * b - c
        idx = np.flatnonzero(disc > 0.0)
        if idx.size == 0:
            return out
        sq = np.sqrt(disc[idx])
        t = np.maximum(-b[idx] - sq, t_min)
        t_end = -b[idx] + sq
        alive = t < t_end
        idx, t, t_end = idx[alive], t[alive], t_end[alive]
        for _ in range(self.max_steps):
            if idx.size == 0:
                break
            s = self.distance(o[idx] + t[:, None] * d[idx])
            hit = np.abs(s) < SURFACE_TOL
            if hit.any():
                out[idx[hit]] = t[hit]
            t = t + np.abs(s)
            keep = ~hit & (t < t_end)
            idx, t, t_end = idx[keep], t[keep], t_end[keep]
        # Newton polish on the quartic keeps normals consistent with the analytic surface
        ok = np.isfinite(out)
        if ok.any():
            oo, dd, tt = o[ok], d[ok], out[ok]
            for _ in range(3):
                p = oo + tt[:, None] * dd
                f = self.implicit(p)
                df = np.sum(self.gradient(p) * dd, axis=-1)
                step = np.where(np.abs(df) > 1e-12, f / np.where(df == 0, 1, df), 0.0)
                tt = tt - np.clip(step, -SURFACE_TOL * 10, SURFACE_TOL * 10)
            out[ok] = tt
        out[out <= t_min] = np.inf
        return out


SHAPES = {"sphere": Sphere, "ellipsoid": Ellipsoid, "torus": Torus}


@dataclass(frozen=True)
class Light:
    """Omni point light (``area == 0``) or a small square emitter facing ``normal``.

    For point lights ``radiance`` is the radiant intensity (W/sr); for area
    lights it is the constant emitted radiance ``L_e``.
    """

    position: tuple
    radiance: SpectralSample
    area: float = 0.0
    normal: tuple = (0.0, 0.0, -1.0)

    @property
    def is_point(self) -> bool:
        return self.area <= 0.0

    def emittance(self) -> SpectralSample:
        """Self-emitted radiosity ``B_e``: constant radiance integrated over the hemisphere."""
        return self.radiance * math.pi

    def flux(self) -> SpectralSample:
        if self.is_point:
            return self.radiance * (4.0 * math.pi)
        return self.emittance() * self.area

    def scaled(self, alpha: float) -> "Light":
        return Light(self.position, self.radiance * alpha, self.area, self.normal)

    def sample_points(self, u: np.ndarray | None, n: int) -> np.ndarray:
        pos = np.asarray(self.position, dtype=float)
        if self.is_point or u is None:
            return np.broadcast_to(pos, (n, 3)).copy()
        nrm = np.asarray(self.normal, dtype=float)
        nrm = nrm / np.linalg.norm(nrm)
        mats = build_frames(nrm[None, :])[0]
        side = math.sqrt(self.area)
        return pos + ((u[:, 0:1] - 0.5) * mats[0] + (u[:, 1:2] - 0.5) * mats[1]) * side


@dataclass(frozen=True)
class Sensor:
    """Pinhole camera; the image plane sits one unit in front of the origin."""

    origin: tuple = (0.0, 0.0, 6.0)
    look_at: tuple = (0.0, 0.0, 0.0)
    up: tuple = (0.0, 1.0, 0.0)
    fov_deg: float = 35.0
    width: int = 128
    height: int = 128

    def basis(self):
        f = normalize(np.asarray(self.look_at, float) - np.asarray(self.origin, float))
        r = normalize(np.cross(f, np.asarray(self.up, float)))
        u = np.cross(r, f)
        return f, r, u

    @property
    def half_extent(self) -> tuple[float, float]:
        hw = math.tan(math.radians(self.fov_deg) / 2.0)
        return hw, hw * self.height / self.width

    def with_size(self, width: int, height: int) -> "Sensor":
        return Sensor(self.origin, self.look_at, self.up, self.fov_deg, width, height)

    def image_point(self, rows, cols):
        """Continuous pixel coordinates -> image-plane offsets (x right, y up)."""
        hw, hh = self.half_extent
        x = (-1.0 + 2.0 * np.asarray(cols) / self.width) * hw
        y = (1.0 - 2.0 * np.asarray(rows) / self.height) * hh
        return x, y

    def rays(self, rows, cols):
        """Unit directions through continuous pixel coordinates and ``cos`` to the optical axis."""
        f, r, u = self.basis()
        x, y = self.image_point(rows, cols)
        d = f + x[..., None] * r + y[..., None] * u
        ln = np.linalg.norm(d, axis=-1)
        return d / ln[..., None], 1.0 / ln

    def project(self, points) -> np.ndarray:
        """World points -> continuous ``(row, col)`` pixel coordinates."""
        f, r, u = self.basis()
        v = np.atleast_2d(points) - np.asarray(self.origin, float)
        z = v @ f
        x, y = (v @ r) / z, (v @ u) / z
        hw, hh = self.half_extent
        col = (x / hw + 1.0) * self.width / 2.0
        row = (1.0 - y / hh) * self.height / 2.0
        return np.stack([row, col], axis=-1)


@dataclass(frozen=True)
class Scene:
    objects: tuple = ()
    lights: tuple = ()
    sensor: Sensor = field(default_factory=Sensor)
    diffuse_albedo: float = DEFAULT_DIFFUSE
    name: str = "scene"
    render: dict = field(default_factory=dict)

    def with_brdf(self, brdf: BrdfModel) -> "Scene":
        from dataclasses import replace

        return replace(self, objects=tuple(replace(o, brdf=brdf) for o in self.objects))

    def with_lights(self, lights) -> "Scene":
        from dataclasses import replace

        return replace(self, lights=tuple(lights))


@dataclass(frozen=True)
class SurfaceHit:
    point: np.ndarray
    frame: LocalFrame
    object_id: int
    distance: float


def intersect_all(scene: Scene, origins, dirs, t_min: float = T_MIN):
    """Nearest hit per ray: returns ``(t, object_id)`` with ``inf`` / ``-1`` for misses."""
    origins = np.atleast_2d(np.asarray(origins, float))
    dirs = np.atleast_2d(np.asarray(dirs, float))
    n = max(origins.shape[0], dirs.shape[0])
    origins = np.broadcast_to(origins, (n, 3))
    dirs = np.broadcast_to(dirs, (n, 3))
    best = np.full(n, np.inf)
    obj = np.full(n, -1, dtype=int)
    for k, surf in enumerate(scene.objects):
        t = surf.intersect(origins, dirs, t_min)
        closer = t < best
        best[closer] = t[closer]
        obj[closer] = k
    return best, obj


def hit_normals(scene: Scene, points, obj, dirs) -> np.ndarray:
    """Unit normals from the implicit gradient, flipped to face the incoming ray."""
    normals = np.zeros_like(points)
    for k, surf in enumerate(scene.objects):
        m = obj == k
        if m.any():
            normals[m] = surf.world_normals(points[m])
    flip = np.sum(normals * dirs, axis=-1) > 0.0
    normals[flip] *= -1.0
    return normals


def raycast(scene: Scene, origin, direction) -> SurfaceHit | None:
    d = np.asarray(direction.as_array() if hasattr(direction, "as_array") else direction, float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise DomainError("ray direction must be unit length")
    o = np.asarray(origin, float)
    t, obj = intersect_all(scene, o[None], d[None])
    if not np.isfinite(t[0]):
        return None
    p = o + t[0] * d
    n = hit_normals(scene, p[None], obj, d[None])
    mats = build_frames(n, TANGENT_AXIS)[0]
    from .spectral import Direction

    frame = LocalFrame(Direction(*mats[0]), Direction(*mats[1]), Direction(*mats[2]))
    return SurfaceHit(p, frame, int(obj[0]), float(t[0]))


def visibility_batch(scene: Scene, x, y) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    v = y - x
    dist = np.linalg.norm(v, axis=-1)
    if np.any(dist == 0.0):
        raise DomainError("visibility between coincident points is undefined")
    t, _ = intersect_all(scene, x, v / dist[:, None])
    return (t >= dist - T_MIN).astype(float)


def visibility(scene: Scene, x, y) -> int:
    return int(visibility_batch(scene, x, y)[0])


def geometry_term(x, nx, y, ny, scene: Scene | None = None) -> float:
    """``V cos(theta_x) cos(theta_y) / |x - y|^2`` with back-facing cosines clamped to zero."""
    x, y, nx, ny = (np.asarray(a, float) for a in (x, y, nx, ny))
    v = y - x
    d2 = float(v @ v)
    if d2 == 0.0:
        raise DomainError("geometry term of coincident points is undefined")
    d = math.sqrt(d2)
    cx = max(0.0, float(nx @ v) / d)
    cy = max(0.0, float(-(ny @ v)) / d)
    if cx == 0.0 or cy == 0.0:
        return 0.0
    vis = 1.0 if scene is None else float(visibility(scene, x, y))
    return vis * cx * cy / d2


def light_samples(scene: Scene, points, normals, uniforms=None):
    """Per light: unit direction to the light, ``cos_i`` and the incident-radiance factor.

    The factor is ``I / d^2`` for point lights and ``L_e cos_l A / d^2`` for
    area lights (one sample point per shadow ray), times visibility. Shapes:
    ``(L, N, 3)``, ``(L, N)``, ``(L, N, 3)``.
    """
    n = points.shape[0]
    nl = len(scene.lights)
    wi = np.zeros((nl, n, 3))
    cos_i = np.zeros((nl, n))
    radiance = np.zeros((nl, n, 3))
    origins = points + SHADOW_OFFSET * normals
    for k, light in enumerate(scene.lights):
        u = None if uniforms is None else uniforms[:, 2 * k: 2 * k + 2]
        lp = light.sample_points(u, n)
        v = lp - points
        d2 = np.sum(v * v, axis=-1)
        d = np.sqrt(d2)
        w = v / d[:, None]
        c = np.sum(w * normals, axis=-1)
        lit = c > 0.0
        vis = np.zeros(n)
        if lit.any():
            if scene.objects:
                t, _ = intersect_all(scene, origins[lit], w[lit])
                vis[lit] = (t >= d[lit] - T_MIN).astype(float)
            else:
                vis[lit] = 1.0
        scale = vis / d2
        if not light.is_point:
            ln = np.asarray(light.normal, float)
            ln = ln / np.linalg.norm(ln)
            scale = scale * np.maximum(0.0, -(w @ ln)) * light.area
        wi[k] = w
        cos_i[k] = np.where(lit, c, 0.0)
        radiance[k] = scale[:, None] * light.radiance.as_array()
    return wi, cos_i, radiance


def shade_points(brdfs, obj, frames, wo, wi, cos_i, radiance, diffuse_albedo, specular: bool = True):
    """Outgoing radiance ``sum_l (f_s + rho/pi) L_l cos_i`` at each point; ``(N, 3)``.

    ``brdfs`` maps object index -> model; ``frames`` are ``(N, 3, 3)`` row frames.
    """
    n = wo.shape[0]
    out = np.zeros((n, 3))
    wo_l = np.einsum("nij,nj->ni", frames, wo)
    for k, model in enumerate(brdfs):
        m = obj == k
        if not m.any():
            continue
        for li in range(wi.shape[0]):
            c = cos_i[li, m]
            active = c > 0.0
            if not active.any():
                continue
            rows = np.flatnonzero(m)[active]
            e = radiance[li, rows] * c[active][:, None]
            contrib = (diffuse_albedo / math.pi) * e
            if specular:
                wi_l = np.einsum("nij,nj->ni", frames[rows], wi[li, rows])
                contrib = contrib + model.evaluate(wi_l, wo_l[rows]) * e
            out[rows] += contrib
    return out


def direct_radiance(scene: Scene, hit: SurfaceHit, toward) -> SpectralSample:
    """Radiance leaving ``hit`` towards the unit direction ``toward`` (direct light only)."""
    wo = np.asarray(toward.as_array() if hasattr(toward, "as_array") else toward, float)[None]
    p = np.asarray(hit.point, float)[None]
    frame = hit.frame.matrix()[None]
    n = frame[:, 2]
    if not scene.lights:
        return SpectralSample(0.0, 0.0, 0.0)
    wi, cos_i, rad = light_samples(scene, p, n)
    brdfs = [o.brdf for o in scene.objects]
    out = shade_points(brdfs, np.array([hit.object_id]), frame, wo, wi, cos_i, rad, scene.diffuse_albedo)
    return SpectralSample.from_array(out[0])


def _pixel_uniforms(seed: int, pixels: np.ndarray, count: int) -> np.ndarray:
    """``count`` uniforms per pixel from a Philox stream keyed by seed, counter offset by pixel."""
    out = np.empty((pixels.size, count))
    for i, p in enumerate(pixels):
        bg = np.random.Philox(key=seed, counter=[0, 0, int(p), 0])
        out[i] = np.random.Generator(bg).random(count)
    return out


@dataclass
class SampleSet:
    """Traced primary samples of a pixel block, reusable for shading with any BRDF.

    Arrays are flattened over ``(pixel, sample)``; ``weight`` is the ``cos^4``
    pinhole factor of each primary ray.
    """

    shape: tuple
    spp: int
    hit: np.ndarray
    obj: np.ndarray
    frames: np.ndarray
    wo: np.ndarray
    weight: np.ndarray
    wi: np.ndarray
    cos_i: np.ndarray
    radiance: np.ndarray

    def shade(self, brdfs, diffuse_albedo: float, specular: bool = True, light_scale: float = 1.0) -> np.ndarray:
        """Per-pixel mean of ``L cos^4`` as ``(rows, cols, 3)``."""
        n = self.hit.size
        vals = np.zeros((n, 3))
        h = self.hit
        if h.any():
            vals[h] = shade_points(brdfs, self.obj[h], self.frames[h], self.wo[h], self.wi[:, h],
                                   self.cos_i[:, h], self.radiance[:, h] * light_scale,
                                   diffuse_albedo, specular)
        vals *= self.weight[:, None]
        vals = vals.reshape(-1, self.spp, 3)
        acc = np.zeros((vals.shape[0], 3))
        for s in range(self.spp):  # fixed summation order keeps tiles bit-identical
            acc += vals[:, s]
        return (acc / self.spp).reshape(self.shape + (3,))


def trace_samples(scene: Scene, sensor: Sensor, spp: int, seed: int, rows=None) -> SampleSet:
    """Trace ``spp`` jittered primary rays for every pixel in ``rows`` (default: all)."""
    if spp < 1:
        raise DomainError("spp must be >= 1")
    if sensor.width < 1 or sensor.height < 1:
        raise DomainError("sensor lattice must be non-empty")
    rows = np.arange(sensor.height) if rows is None else np.asarray(rows)
    cols = np.arange(sensor.width)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    pix = (rr * sensor.width + cc).ravel()
    n_area = sum(not l.is_point for l in scene.lights)
    per_sample = 2 + 2 * len(scene.lights) if n_area else 2
    u = _pixel_uniforms(seed, pix, spp * per_sample).reshape(pix.size * spp, per_sample)
    py = np.repeat(rr.ravel(), spp) + u[:, 0]
    px = np.repeat(cc.ravel(), spp) + u[:, 1]
    dirs, cos_axis = sensor.rays(py, px)
    origin = np.asarray(sensor.origin, float)
    t, obj = intersect_all(scene, origin[None], dirs)
    hit = np.isfinite(t)
    n = t.size
    frames = np.zeros((n, 3, 3))
    nl = len(scene.lights)
    wi = np.zeros((nl, n, 3))
    cos_i = np.zeros((nl, n))
    radiance = np.zeros((nl, n, 3))
    if hit.any():
        pts = origin + t[hit, None] * dirs[hit]
        normals = hit_normals(scene, pts, obj[hit], dirs[hit])
        frames[hit] = build_frames(normals, TANGENT_AXIS)
        lu = u[hit, 2:] if n_area else None
        wi[:, hit], cos_i[:, hit], radiance[:, hit] = light_samples(scene, pts, normals, lu)
    return SampleSet((rows.size, sensor.width), spp, hit, obj, frames, -dirs, cos_axis**4, wi, cos_i, radiance)


def measure_flux(scene: Scene, sensor: Sensor | None = None, spp: int = 16, seed: int = 0,
                 workers: int = 1, tile_rows: int = 16, specular: bool = True):
    """Per-pixel flux lattice of ``scene`` seen through a pinhole ``sensor``.

    Each pixel averages ``spp`` jittered rays of ``L cos^4(theta)``: the flux
    per unit pixel area on an image plane one unit behind the pinhole. Tiles
    of ``tile_rows`` rows run on ``workers`` threads; values are independent of
    both because every pixel draws from its own stream.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .lattice import FluxLattice

    sensor = scene.sensor if sensor is None else sensor
    if sensor.width < 1 or sensor.height < 1:
        raise DomainError("sensor lattice must be non-empty")
    if spp < 1:
        raise DomainError("spp must be >= 1")
    brdfs = [o.brdf for o in scene.objects]
    starts = range(0, sensor.height, tile_rows)

    def work(r0):
        rows = np.arange(r0, min(r0 + tile_rows, sensor.height))
        return trace_samples(scene, sensor, spp, seed, rows).shade(brdfs, scene.diffuse_albedo, specular)

    if workers <= 1:
        parts = [work(r0) for r0 in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(work, starts))
    cells = np.concatenate(parts, axis=0)
    return FluxLattice(cells, {"scene": scene.name, "brdf": ",".join(b.name for b in brdfs), "bands": 3})
