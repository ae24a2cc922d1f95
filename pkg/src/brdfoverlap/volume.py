"""Multi-object volume renderer: iso-surfaces (DSR) and composited volumes (DVR).

Objects share one voxel lattice. Rays march front to back with a fixed step
in voxel units; iso crossings are refined by bisection and composited in
depth order with the transfer-function samples of the same step.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from scipy import ndimage

from .brdf import _kernels as K
from .brdf.models import BrdfModel, make_model
from .spectral import DomainError

STEP_VOXELS = 0.05
BISECTION_TOL = 1e-4
ALPHA_CUTOFF = 0.999
DIFFUSE = 0.2
MIN_PHANTOM_DIM = 64

DSR, DVR = 0, 1
CENTRAL, BSPLINE = 0, 1


@dataclass(frozen=True)
class VoxelVolume:
    """Scalar densities in ``[0, 1]``; voxel ``i`` sits at ``origin + i * spacing``.

    The default origin centres the lattice on the world origin.
    """

    values: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)
    origin: tuple | None = None
    name: str = "volume"

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 3 or min(v.shape) < 2:
            raise DomainError(f"volume needs >= 2 voxels per axis, got {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise DomainError("volume densities must lie in [0, 1]")
        object.__setattr__(self, "values", v)
        if self.origin is None:
            half = (np.array(v.shape) - 1) / 2.0 * np.asarray(self.spacing, float)
            object.__setattr__(self, "origin", tuple(-half))

    @property
    def dims(self) -> tuple:
        return self.values.shape

    def to_voxel(self, p) -> np.ndarray:
        return (np.asarray(p, float) - np.asarray(self.origin)) / np.asarray(self.spacing, float)

    def same_lattice(self, other: "VoxelVolume") -> bool:
        return (self.dims == other.dims and np.allclose(self.spacing, other.spacing)
                and np.allclose(self.origin, other.origin))


# --- reconstruction -------------------------------------------------------

@njit(cache=True, nogil=True)
def _trilinear(v, x, y, z):
    nx, ny, nz = v.shape
    if x < 0.0 or y < 0.0 or z < 0.0 or x > nx - 1 or y > ny - 1 or z > nz - 1:
        return 0.0
    i = min(int(x), nx - 2)
    j = min(int(y), ny - 2)
    k = min(int(z), nz - 2)
    fx, fy, fz = x - i, y - j, z - k
    c00 = v[i, j, k] * (1 - fx) + v[i + 1, j, k] * fx
    c10 = v[i, j + 1, k] * (1 - fx) + v[i + 1, j + 1, k] * fx
    c01 = v[i, j, k + 1] * (1 - fx) + v[i + 1, j, k + 1] * fx
    c11 = v[i, j + 1, k + 1] * (1 - fx) + v[i + 1, j + 1, k + 1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz


@njit(cache=True, nogil=True)
def _trilinear_vec(g, x, y, z, out):
    for c in range(3):
        out[c] = _trilinear(g[c], x, y, z)


@njit(cache=True, nogil=True)
def _bspline_weights(t, w, dw):
    s = 1.0 - t
    w[0] = s * s * s / 6.0
    w[1] = (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0
    w[2] = (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0
    w[3] = t * t * t / 6.0
    dw[0] = -0.5 * s * s
    dw[1] = 1.5 * t * t - 2.0 * t
    dw[2] = -1.5 * t * t + t + 0.5
    dw[3] = 0.5 * t * t


@njit(cache=True, nogil=True)
def _bspline_gradient(v, x, y, z, out):
    """Derivative of the cubic B-spline whose coefficients are the voxel values (edge-clamped)."""
    nx, ny, nz = v.shape
    wx = np.empty(4)
    wy = np.empty(4)
    wz = np.empty(4)
    dx = np.empty(4)
    dy = np.empty(4)
    dz = np.empty(4)
    i0 = int(math.floor(x))
    j0 = int(math.floor(y))
    k0 = int(math.floor(z))
    _bspline_weights(x - i0, wx, dx)
    _bspline_weights(y - j0, wy, dy)
    _bspline_weights(z - k0, wz, dz)
    gx = 0.0
    gy = 0.0
    gz = 0.0
    for a in range(4):
        ii = min(max(i0 - 1 + a, 0), nx - 1)
        for b in range(4):
            jj = min(max(j0 - 1 + b, 0), ny - 1)
            for c in range(4):
                kk = min(max(k0 - 1 + c, 0), nz - 1)
                val = v[ii, jj, kk]
                gx += val * dx[a] * wy[b] * wz[c]
                gy += val * wx[a] * dy[b] * wz[c]
                gz += val * wx[a] * wy[b] * dz[c]
    out[0] = gx
    out[1] = gy
    out[2] = gz


def central_difference_field(values: np.ndarray) -> np.ndarray:
    """Per-voxel central differences (one-sided at the faces) as ``(3, nx, ny, nz)``."""
    return np.ascontiguousarray(np.stack(np.gradient(values), axis=0))


def _points(p):
    p = np.asarray(p, dtype=float)
    return p.reshape(-1, 3), p.shape[:-1]


def sample_trilinear(vol: VoxelVolume, p):
    """Trilinear density at world point(s); zero outside the lattice."""
    pts, shape = _points(p)
    vox = vol.to_voxel(pts)
    out = np.array([_trilinear(vol.values, *q) for q in vox])
    return out.reshape(shape) if shape else float(out[0])


def gradient_central(vol: VoxelVolume, p):
    """Central-difference gradient (world units) at world point(s)."""
    pts, shape = _points(p)
    field_ = central_difference_field(vol.values)
    vox = vol.to_voxel(pts)
    out = np.empty((len(vox), 3))
    for n, q in enumerate(vox):
        _trilinear_vec(field_, q[0], q[1], q[2], out[n])
    out /= np.asarray(vol.spacing, float)
    return out.reshape(shape + (3,))


def gradient_bspline(vol: VoxelVolume, p):
    """Analytic gradient (world units) of the cubic B-spline reconstruction."""
    pts, shape = _points(p)
    vox = vol.to_voxel(pts)
    out = np.empty((len(vox), 3))
    for n, q in enumerate(vox):
        _bspline_gradient(vol.values, q[0], q[1], q[2], out[n])
    out /= np.asarray(vol.spacing, float)
    return out.reshape(shape + (3,))


def upsample_bspline(vol: VoxelVolume, factor: int = 4) -> VoxelVolume:
    """Resample the cubic B-spline reconstruction onto a ``factor`` times finer lattice."""
    if factor < 1:
        raise DomainError("upsampling factor must be >= 1")
    n = np.array(vol.dims)
    axes = [np.linspace(0.0, d - 1.0, (d - 1) * factor + 1) for d in n]
    grid = np.meshgrid(*axes, indexing="ij")
    vals = ndimage.map_coordinates(vol.values, grid, order=3, prefilter=False, mode="nearest")
    sp = tuple(np.asarray(vol.spacing, float) / factor)
    return VoxelVolume(np.clip(vals, 0.0, 1.0), sp, vol.origin, vol.name)


# --- phantom ----------------------------------------------------------------

@dataclass(frozen=True)
class PhantomSpec:
    """Radii are fractions of the lattice half-width; widths are in voxels."""

    shell_outer: float = 0.9
    shell_inner: float = 0.8
    cortex_outer: float = 0.72
    cortex_inner: float = 0.55
    edge_width: float = 1.0
    cortex_noise_sigma: float = 2.0
    blob_peak: float = 0.9
    blob_sigma: float = 0.14
    blob_warp: float = 0.35
    blob_centers: tuple = ((0.35, -0.35, 0.25), (-0.3, -0.4, -0.15), (0.4, -0.1, -0.3), (-0.1, -0.45, 0.35))


@dataclass(frozen=True)
class Phantom:
    shell: VoxelVolume
    cortex: VoxelVolume
    density: VoxelVolume
    spec: PhantomSpec

    @property
    def volumes(self) -> tuple:
        return self.shell, self.cortex, self.density


def _smooth_noise(rng, shape, sigma) -> np.ndarray:
    n = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return n / n.std()


def generate_phantom(spec: PhantomSpec | None = None, dims: int | Sequence[int] = 64, seed: int = 42) -> Phantom:
    """Synthetic head stand-in: a hard outer shell, a noisy mid layer and four density blobs."""
    spec = spec or PhantomSpec()
    dims = (dims,) * 3 if np.isscalar(dims) else tuple(int(d) for d in dims)
    if min(dims) < MIN_PHANTOM_DIM:
        raise DomainError(f"phantom needs >= {MIN_PHANTOM_DIM} voxels per axis to keep the layers nested, got {dims}")
    rng = np.random.default_rng(seed)
    half = (np.array(dims) - 1) / 2.0
    scale = float(half.min())
    idx = np.meshgrid(*[np.arange(d, dtype=float) for d in dims], indexing="ij")
    u = [(idx[a] - half[a]) / scale for a in range(3)]
    r = np.sqrt(u[0] ** 2 + u[1] ** 2 + u[2] ** 2)
    w = spec.edge_width

    s = np.minimum(spec.shell_outer - r, r - spec.shell_inner) * scale
    shell = 0.5 * (1.0 + np.tanh(s / w))

    band = np.minimum(spec.cortex_outer - r, r - spec.cortex_inner) * scale
    noise = _smooth_noise(rng, dims, spec.cortex_noise_sigma)
    cortex = 0.5 * (1.0 + np.tanh(band / (2.0 * w))) * np.clip(0.6 + 0.25 * noise, 0.0, 1.0)

    warp = np.clip(_smooth_noise(rng, dims, 2.0 * spec.cortex_noise_sigma), -2.5, 2.5) / 2.5
    density = np.zeros(dims)
    for c in spec.blob_centers:
        q = ((u[0] - c[0]) ** 2 + (u[1] - c[1]) ** 2 + (u[2] - c[2]) ** 2) / spec.blob_sigma**2
        density = np.maximum(density, spec.blob_peak * np.exp(-0.5 * q * (1.0 + spec.blob_warp * warp)))
    # peaks sit between lattice points; pin each to the voxel nearest its centre
    for c in spec.blob_centers:
        ijk = tuple(int(round(half[a] + c[a] * scale)) for a in range(3))
        density[ijk] = max(density[ijk], spec.blob_peak)

    mk = lambda v, n: VoxelVolume(np.clip(v, 0.0, 1.0), name=n)
    return Phantom(mk(shell, "shell"), mk(cortex, "cortex"), mk(density, "density"), spec)


# --- objects ----------------------------------------------------------------

@dataclass(frozen=True)
class TransferFunction:
    """Opacity and colour ramps over density; zero opacity below ``density_lo``.

    Opacities are per unit of world path length, one voxel at unit spacing.
    """

    density_lo: float
    density_hi: float
    alpha_lo: float
    alpha_hi: float
    color_lo: tuple = (1.0, 1.0, 1.0)
    color_hi: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not self.density_hi > self.density_lo:
            raise DomainError("transfer ramp needs density_hi > density_lo")
        if not 0.0 <= self.alpha_lo <= self.alpha_hi <= 1.0:
            raise DomainError("transfer opacities must satisfy 0 <= alpha_lo <= alpha_hi <= 1")

    def opacity(self, rho):
        rho = np.asarray(rho, float)
        t = np.clip((rho - self.density_lo) / (self.density_hi - self.density_lo), 0.0, 1.0)
        return np.where(rho < self.density_lo, 0.0, self.alpha_lo + t * (self.alpha_hi - self.alpha_lo))

    def color(self, rho):
        t = np.clip((np.asarray(rho, float) - self.density_lo) / (self.density_hi - self.density_lo), 0.0, 1.0)
        lo, hi = np.asarray(self.color_lo), np.asarray(self.color_hi)
        return lo + t[..., None] * (hi - lo)

    def scaled(self, k: float) -> "TransferFunction":
        return TransferFunction(self.density_lo, self.density_hi, min(1.0, self.alpha_lo * k),
                                min(1.0, self.alpha_hi * k), self.color_lo, self.color_hi)


@dataclass(frozen=True)
class IsoLevel:
    iso: float
    opacity: float
    tint: tuple = (1.0, 1.0, 1.0)
    label: str = ""

    def __post_init__(self):
        if not 0.0 < self.iso < 1.0:
            raise DomainError(f"iso value must lie in (0, 1), got {self.iso}")
        if not 0.0 <= self.opacity <= 1.0:
            raise DomainError("iso opacity must lie in [0, 1]")


@dataclass(frozen=True)
class RenderObject:
    volume: VoxelVolume
    brdf: BrdfModel
    mode: str = "dsr"
    levels: tuple = ()
    transfer: TransferFunction | None = None
    normal_estimator: str = "central"
    name: str = ""

    def __post_init__(self):
        if self.mode == "dsr":
            if not self.levels or self.transfer is not None:
                raise DomainError("a DSR object needs iso levels and no transfer function")
        elif self.mode == "dvr":
            if self.transfer is None or self.levels:
                raise DomainError("a DVR object needs a transfer function and no iso levels")
        else:
            raise DomainError(f"unknown render mode {self.mode!r}")
        if self.normal_estimator not in ("central", "bspline"):
            raise DomainError(f"unknown normal estimator {self.normal_estimator!r}")

    def channels(self) -> list:
        if self.mode == "dsr":
            return [lv.label or f"{self.name}@{lv.iso:g}" for lv in self.levels]
        return [self.name]


# --- presets ------------------------------------------------------------------

# rendering id -> (shell, cortex, density maps)
PRESETS = {
    1: ("Ward", "Ashikhmin", "He-Torrance"),
    2: ("Ward", "He-Torrance", "Ashikhmin"),
    3: ("Ashikhmin", "Ward", "He-Torrance"),
    4: ("Ashikhmin", "He-Torrance", "Ward"),
    5: ("He-Torrance", "Ward", "Ashikhmin"),
    6: ("He-Torrance", "Ashikhmin", "Ward"),
    7: ("Cook-Torrance", "Schlick-Lewis", "Phong"),
    8: ("Cook-Torrance", "Phong", "Schlick-Lewis"),
    9: ("Schlick-Lewis", "Cook-Torrance", "Phong"),
    10: ("Schlick-Lewis", "Phong", "Cook-Torrance"),
    11: ("Phong", "Schlick-Lewis", "Cook-Torrance"),
    12: ("Phong", "Cook-Torrance", "Schlick-Lewis"),
    13: ("Ward", "Ward", "Ward"),
    14: ("Ashikhmin", "Ashikhmin", "Ashikhmin"),
    15: ("He-Torrance", "He-Torrance", "He-Torrance"),
    16: ("Cook-Torrance", "Cook-Torrance", "Cook-Torrance"),
    17: ("Schlick-Lewis", "Schlick-Lewis", "Schlick-Lewis"),
    18: ("Phong", "Phong", "Phong"),
    19: ("Ward", "Schlick-Lewis", "Phong"),
    20: ("Ward", "Phong", "Schlick-Lewis"),
    21: ("Schlick-Lewis", "Ward", "Phong"),
    22: ("Schlick-Lewis", "Phong", "Ward"),
    23: ("Phong", "Ward", "Schlick-Lewis"),
    24: ("Phong", "Schlick-Lewis", "Ward"),
}

DENSITY_LEVELS = (
    IsoLevel(0.70, 0.3, (0.0, 0.0, 1.0), "blue"),
    IsoLevel(0.75, 0.4, (0.0, 1.0, 0.0), "green"),
    IsoLevel(0.80, 0.5, (1.0, 1.0, 0.0), "yellow"),
    IsoLevel(0.85, 0.6, (1.0, 0.0, 0.0), "red"),
)
SHELL_LEVEL = IsoLevel(0.5, 0.97, (0.93, 0.89, 0.80), "shell")
CORTEX_TRANSFER = TransferFunction(0.2, 1.0, 0.001, 0.2, (0.80, 0.50, 0.45), (0.95, 0.78, 0.72))
DENSITY_TRANSFER = TransferFunction(0.70, 0.85, 0.3, 0.6, (0.0, 0.0, 1.0), (1.0, 0.0, 0.0))


def apply_combination_preset(preset: int) -> dict:
    if preset not in PRESETS:
        raise DomainError(f"unknown preset {preset!r}; valid ids are 1..24")
    shell, cortex, density = PRESETS[preset]
    return {"shell": shell, "cortex": cortex, "density": density}


def preset_objects(phantom: Phantom, preset: int, figure10: bool = False) -> list:
    b = {k: make_model(v) for k, v in apply_combination_preset(preset).items()}
    objs = [
        RenderObject(phantom.shell, b["shell"], "dsr", (SHELL_LEVEL,), name="shell"),
        RenderObject(phantom.cortex, b["cortex"], "dvr", transfer=CORTEX_TRANSFER,
                     normal_estimator="bspline", name="cortex"),
    ]
    if figure10:
        objs.append(RenderObject(phantom.density, b["density"], "dsr", DENSITY_LEVELS, name="density"))
    else:
        objs.append(RenderObject(phantom.density, b["density"], "dvr", transfer=DENSITY_TRANSFER, name="density"))
    return objs


# --- renderer ---------------------------------------------------------------

@dataclass(frozen=True)
class RenderSettings:
    width: int = 256
    height: int = 256
    spp: int = 8
    seed: int = 0
    step: float = STEP_VOXELS
    workers: int = 1
    tile_rows: int = 8
    fov_deg: float = 35.0
    view_angle_deg: float = 45.0
    distance_factor: float = 1.15
    diffuse: float = DIFFUSE
    ambient_bg: float = 0.2
    diffuse_bg: float = 0.3
    background_sigma: float = 8.0
    alpha_cutoff: float = ALPHA_CUTOFF
    bisection_tol: float = BISECTION_TOL

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DomainError("image size must be positive")
        if self.spp < 1:
            raise DomainError("spp must be >= 1")
        if not self.step > 0.0:
            raise DomainError("step must be > 0")


@dataclass(frozen=True)
class Camera:
    origin: np.ndarray
    forward: np.ndarray
    right: np.ndarray
    up: np.ndarray
    half_w: float
    half_h: float
    lights: np.ndarray
    intensity: float

    def project_sphere_area(self, center, radius, width, height) -> float:
        """Pixel area of a sphere centred on the optical axis."""
        d = float(np.linalg.norm(np.asarray(center) - self.origin))
        rho = math.tan(math.asin(radius / d))
        return math.pi * (rho / self.half_w * width / 2.0) * (rho / self.half_h * height / 2.0)


def make_camera(vol: VoxelVolume, settings: RenderSettings) -> Camera:
    """Orbit camera framing the lattice's bounding sphere, with four lights behind it.

    The lights sit at the corners of the view frustum's cross-section one
    camera-to-centre distance behind the camera.
    """
    ext = (np.array(vol.dims) - 1) * np.asarray(vol.spacing, float)
    center = np.asarray(vol.origin) + ext / 2.0
    radius = 0.5 * float(np.linalg.norm(ext)) / math.sqrt(3.0)
    half = math.radians(settings.fov_deg) / 2.0
    dist = settings.distance_factor * radius / math.sin(half)
    a = math.radians(settings.view_angle_deg)
    back = np.array([math.sin(a), -math.cos(a), 0.0])
    origin = center + dist * back
    f = -back
    world_up = np.array([0.0, 0.0, 1.0])
    r = np.cross(f, world_up)
    r /= np.linalg.norm(r)
    u = np.cross(r, f)
    hw = math.tan(half)
    hh = hw * settings.height / settings.width
    plane = origin + dist * back
    reach = 2.0 * dist
    lights = np.array([plane + sx * reach * hw * r + sy * reach * hh * u for sx in (-1, 1) for sy in (-1, 1)])
    # each light delivers a quarter of unit irradiance at the centre
    d2 = float(np.sum((lights[0] - center) ** 2))
    return Camera(origin, f, r, u, hw, hh, lights, 0.25 * d2)


def background_image(settings: RenderSettings, camera: Camera) -> np.ndarray:
    """Seeded random colours, blurred and lit by ambient plus diffuse terms only."""
    rng = np.random.default_rng(settings.seed)
    noise = rng.random((settings.height, settings.width, 3))
    blur = ndimage.gaussian_filter(noise, (settings.background_sigma, settings.background_sigma, 0), mode="wrap")
    sd = blur.std(axis=(0, 1))
    blur = np.clip(0.5 + 0.2 * (blur - blur.mean(axis=(0, 1))) / np.where(sd > 0, sd, 1.0), 0.0, 1.0)
    normal = -camera.forward
    far = camera.origin + 1e3 * camera.forward
    dirs = camera.lights - far
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    cos = float(np.mean(np.maximum(0.0, dirs @ normal)))
    return blur * (settings.ambient_bg + settings.diffuse_bg * cos)


@njit(cache=True, nogil=True)
def _shade(kind, params, p, n, v, lights, intensity, diffuse, rad, fbuf):
    """Direct light from omni sources: ``sum (f_s + rho/pi) I cos / d^2`` per band."""
    # tangent frame from the projected world x axis
    tx, ty, tz = 1.0 - n[0] * n[0], -n[0] * n[1], -n[0] * n[2]
    tl = math.sqrt(tx * tx + ty * ty + tz * tz)
    if tl <= 1e-6:
        tx, ty, tz = -n[1] * n[0], 1.0 - n[1] * n[1], -n[1] * n[2]
        tl = math.sqrt(tx * tx + ty * ty + tz * tz)
    tx /= tl
    ty /= tl
    tz /= tl
    bx = n[1] * tz - n[2] * ty
    by = n[2] * tx - n[0] * tz
    bz = n[0] * ty - n[1] * tx
    vx = v[0] * tx + v[1] * ty + v[2] * tz
    vy = v[0] * bx + v[1] * by + v[2] * bz
    vz = v[0] * n[0] + v[1] * n[1] + v[2] * n[2]
    rad[0] = 0.0
    rad[1] = 0.0
    rad[2] = 0.0
    for li in range(lights.shape[0]):
        lx = lights[li, 0] - p[0]
        ly = lights[li, 1] - p[1]
        lz = lights[li, 2] - p[2]
        d2 = lx * lx + ly * ly + lz * lz
        d = math.sqrt(d2)
        lx /= d
        ly /= d
        lz /= d
        c = lx * n[0] + ly * n[1] + lz * n[2]
        if c <= K.GRAZING_EPS:
            continue
        wx = lx * tx + ly * ty + lz * tz
        wy = lx * bx + ly * by + lz * bz
        K.eval_rgb(kind, params, wx, wy, c, vx, vy, vz, fbuf)
        e = intensity * c / d2
        for b in range(3):
            rad[b] += (fbuf[b] + diffuse / math.pi) * e


@njit(cache=True, nogil=True)
def _normal(vols, grads, est, obj, x, y, z, spacing, d, out):
    if est[obj] == 1:
        _bspline_gradient(vols[obj], x, y, z, out)
    else:
        _trilinear_vec(grads[obj], x, y, z, out)
    for c in range(3):
        out[c] = -out[c] / spacing[c]
    ln = math.sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2])
    if ln < 1e-12:
        out[0] = -d[0]
        out[1] = -d[1]
        out[2] = -d[2]
        return
    for c in range(3):
        out[c] /= ln
    if out[0] * d[0] + out[1] * d[1] + out[2] * d[2] > 0.0:
        for c in range(3):
            out[c] = -out[c]


@njit(cache=True, nogil=True)
def _render_tile(vols, grads, est, mode, kinds, params, tf, tf_col, obj_chan,
                 lvl_obj, lvl_iso, lvl_alpha, lvl_tint, lvl_chan, n_chan,
                 origin, spacing, center, radius,
                 cam, fwd, right, up, hw, hh, width, height, row0, nrows,
                 uni, lights, intensity, diffuse, step, tol, alpha_cut,
                 out_c, out_t, out_layers, out_cov):
    nobj = vols.shape[0]
    nlev = lvl_obj.shape[0]
    spp = uni.shape[1]
    step_w = step * min(spacing[0], min(spacing[1], spacing[2]))
    cur = np.empty(nobj)
    prev = np.empty(nobj)
    ev_t = np.empty(nlev + nobj)
    ev_id = np.empty(nlev + nobj, dtype=np.int64)
    p = np.empty(3)
    d = np.empty(3)
    v = np.empty(3)
    nrm = np.empty(3)
    rad = np.empty(3)
    fbuf = np.empty(3)
    col = np.empty(3)
    hitobj = np.empty(nobj, dtype=np.bool_)
    done = np.empty(nlev, dtype=np.bool_)
    for pi in range(nrows * width):
        row = row0 + pi // width
        colx = pi % width
        for s in range(spp):
            sx = (-1.0 + 2.0 * (colx + uni[pi, s, 1]) / width) * hw
            sy = (1.0 - 2.0 * (row + uni[pi, s, 0]) / height) * hh
            for c in range(3):
                d[c] = fwd[c] + sx * right[c] + sy * up[c]
            dl = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
            for c in range(3):
                d[c] /= dl
                v[c] = -d[c]
            cr = 0.0
            cg = 0.0
            cb = 0.0
            T = 1.0
            for o in range(nobj):
                hitobj[o] = False
            for li in range(nlev):
                done[li] = False
            # clip to the bounding sphere of the non-empty region
            ox = cam[0] - center[0]
            oy = cam[1] - center[1]
            oz = cam[2] - center[2]
            bq = ox * d[0] + oy * d[1] + oz * d[2]
            cq = ox * ox + oy * oy + oz * oz - radius * radius
            disc = bq * bq - cq
            if disc > 0.0:
                sq = math.sqrt(disc)
                t_end = -bq + sq
                t = max(-bq - sq, 0.0) + uni[pi, s, 2] * step_w
                first = True
                while t <= t_end:
                    for c in range(3):
                        p[c] = cam[c] + t * d[c]
                    x = (p[0] - origin[0]) / spacing[0]
                    y = (p[1] - origin[1]) / spacing[1]
                    z = (p[2] - origin[2]) / spacing[2]
                    for o in range(nobj):
                        cur[o] = _trilinear(vols[o], x, y, z)
                    nev = 0
                    if not first:
                        for li in range(nlev):
                            if done[li]:
                                continue
                            o = lvl_obj[li]
                            a0 = prev[o] - lvl_iso[li]
                            a1 = cur[o] - lvl_iso[li]
                            if (a0 < 0.0) != (a1 < 0.0):
                                lo = t - step_w
                                hi = t
                                flo = a0
                                while (hi - lo) > tol * step_w / step:
                                    mid = 0.5 * (lo + hi)
                                    fm = _trilinear(vols[o], (cam[0] + mid * d[0] - origin[0]) / spacing[0],
                                                    (cam[1] + mid * d[1] - origin[1]) / spacing[1],
                                                    (cam[2] + mid * d[2] - origin[2]) / spacing[2]) - lvl_iso[li]
                                    if (fm < 0.0) == (flo < 0.0):
                                        lo = mid
                                        flo = fm
                                    else:
                                        hi = mid
                                ev_t[nev] = 0.5 * (lo + hi)
                                ev_id[nev] = li
                                nev += 1
                                done[li] = True
                    for o in range(nobj):
                        if mode[o] == 1 and cur[o] >= tf[o, 0]:
                            ev_t[nev] = t
                            ev_id[nev] = nlev + o
                            nev += 1
                    # depth order within the step
                    for a in range(1, nev):
                        kt = ev_t[a]
                        ki = ev_id[a]
                        b = a - 1
                        while b >= 0 and (ev_t[b] > kt or (ev_t[b] == kt and ev_id[b] > ki)):
                            ev_t[b + 1] = ev_t[b]
                            ev_id[b + 1] = ev_id[b]
                            b -= 1
                        ev_t[b + 1] = kt
                        ev_id[b + 1] = ki
                    for e in range(nev):
                        te = ev_t[e]
                        eid = ev_id[e]
                        if eid < nlev:
                            o = lvl_obj[eid]
                            alpha = lvl_alpha[eid]
                            for c in range(3):
                                col[c] = lvl_tint[eid, c]
                            chan = lvl_chan[eid]
                        else:
                            o = eid - nlev
                            rho = cur[o]
                            u = min(1.0, max(0.0, (rho - tf[o, 0]) / (tf[o, 1] - tf[o, 0])))
                            a_vox = tf[o, 2] + u * (tf[o, 3] - tf[o, 2])
                            alpha = 1.0 - (1.0 - a_vox) ** step_w
                            for c in range(3):
                                col[c] = tf_col[o, 0, c] + u * (tf_col[o, 1, c] - tf_col[o, 0, c])
                            chan = obj_chan[o]
                        if alpha <= 0.0:
                            continue
                        for c in range(3):
                            p[c] = cam[c] + te * d[c]
                        _normal(vols, grads, est, o, (p[0] - origin[0]) / spacing[0],
                                (p[1] - origin[1]) / spacing[1], (p[2] - origin[2]) / spacing[2],
                                spacing, d, nrm)
                        _shade(kinds[o], params[o], p, nrm, v, lights, intensity, diffuse, rad, fbuf)
                        w = T * alpha
                        cr += w * col[0] * rad[0]
                        cg += w * col[1] * rad[1]
                        cb += w * col[2] * rad[2]
                        out_layers[pi, chan] += w * (rad[0] + rad[1] + rad[2]) / 3.0
                        hitobj[o] = True
                        T *= 1.0 - alpha
                    if 1.0 - T > alpha_cut:
                        break
                    for o in range(nobj):
                        prev[o] = cur[o]
                    first = False
                    t += step_w
            out_c[pi, 0] += cr
            out_c[pi, 1] += cg
            out_c[pi, 2] += cb
            out_t[pi] += T
            for o in range(nobj):
                if hitobj[o]:
                    out_cov[pi, o] += 1.0
        inv = 1.0 / spp
        for c in range(3):
            out_c[pi, c] *= inv
        out_t[pi] *= inv
        for ch in range(n_chan):
            out_layers[pi, ch] *= inv
        for o in range(nobj):
            out_cov[pi, o] *= inv


@dataclass
class RenderResult:
    """Linear radiance with the compositing side channels.

    ``layers`` holds, per channel (iso level or DVR object), the composited
    weight times untinted shading; ``coverage`` is the per-object fraction of
    samples that touched the object.
    """

    radiance: np.ndarray
    alpha: np.ndarray
    background: np.ndarray
    layers: np.ndarray
    channel_names: list
    coverage: np.ndarray
    object_names: list
    camera: Camera
    meta: dict = field(default_factory=dict)

    def display(self) -> np.ndarray:
        return to_display(self.radiance)

    def dominant_channel(self, names: Sequence[str]) -> np.ndarray:
        """Index into ``names`` of the strongest listed channel per pixel; -1 where none contributes."""
        idx = [self.channel_names.index(n) for n in names]
        sub = self.layers[..., idx]
        out = np.argmax(sub, axis=-1)
        out[sub.max(axis=-1) <= 0.0] = -1
        return out


def to_display(radiance: np.ndarray, percentile: float = 99.0, gamma: float = 2.2) -> np.ndarray:
    """Global linear scale putting the given percentile at 1, clamp, then gamma encode to 8 bits."""
    ref = float(np.percentile(radiance.max(axis=-1), percentile))
    scale = 1.0 / ref if ref > 0.0 else 1.0
    lin = np.clip(radiance * scale, 0.0, 1.0)
    return np.round(255.0 * lin ** (1.0 / gamma)).astype(np.uint8)


def _pixel_uniforms(seed, pixels, count):
    from .scene import _pixel_uniforms as pu

    return pu(seed, pixels, count)


def render_composite(objects: Sequence[RenderObject], settings: RenderSettings | None = None) -> RenderResult:
    settings = settings or RenderSettings()
    if not objects:
        raise DomainError("render needs at least one object")
    ref = objects[0].volume
    for o in objects[1:]:
        if not o.volume.same_lattice(ref):
            raise DomainError("all render objects must share one voxel lattice")
    camera = make_camera(ref, settings)
    bg = background_image(settings, camera)

    vols = np.ascontiguousarray(np.stack([o.volume.values for o in objects]))
    grads = np.ascontiguousarray(np.stack([central_difference_field(o.volume.values) for o in objects]))
    est = np.array([BSPLINE if o.normal_estimator == "bspline" else CENTRAL for o in objects], dtype=np.int64)
    mode = np.array([DVR if o.mode == "dvr" else DSR for o in objects], dtype=np.int64)
    kinds = np.array([o.brdf.kind for o in objects], dtype=np.int64)
    params = np.ascontiguousarray(np.stack([o.brdf.packed() for o in objects]))
    tf = np.zeros((len(objects), 4))
    tf_col = np.zeros((len(objects), 2, 3))
    chans, obj_chan = [], np.full(len(objects), -1, dtype=np.int64)
    lvl_obj, lvl_iso, lvl_alpha, lvl_tint, lvl_chan = [], [], [], [], []
    for k, o in enumerate(objects):
        if o.mode == "dvr":
            t = o.transfer
            tf[k] = (t.density_lo, t.density_hi, t.alpha_lo, t.alpha_hi)
            tf_col[k] = (t.color_lo, t.color_hi)
            obj_chan[k] = len(chans)
            chans.append(o.channels()[0])
        else:
            tf[k, 0] = np.inf
            for lv, name in zip(o.levels, o.channels()):
                lvl_obj.append(k)
                lvl_iso.append(lv.iso)
                lvl_alpha.append(lv.opacity)
                lvl_tint.append(lv.tint)
                lvl_chan.append(len(chans))
                chans.append(name)
    lvl_obj = np.array(lvl_obj, dtype=np.int64)
    lvl_iso = np.array(lvl_iso, dtype=float)
    lvl_alpha = np.array(lvl_alpha, dtype=float)
    lvl_tint = np.array(lvl_tint, dtype=float).reshape(-1, 3)
    lvl_chan = np.array(lvl_chan, dtype=np.int64)

    # bounding sphere of every voxel that can contribute
    nz = np.argwhere(np.any(vols > 0.0, axis=0))
    spacing = np.asarray(ref.spacing, float)
    origin = np.asarray(ref.origin, float)
    if nz.size:
        pts = origin + nz * spacing
        center = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
        radius = float(np.sqrt(np.max(np.sum((pts - center) ** 2, axis=1)))) + 2.0 * float(spacing.max())
    else:
        center, radius = origin, 0.0

    W, H, spp = settings.width, settings.height, settings.spp
    nch = max(len(chans), 1)

    def work(r0):
        rows = min(settings.tile_rows, H - r0)
        pix = np.arange(r0 * W, (r0 + rows) * W)
        uni = _pixel_uniforms(settings.seed, pix, spp * 3).reshape(pix.size, spp, 3)
        oc = np.zeros((pix.size, 3))
        ot = np.zeros(pix.size)
        ol = np.zeros((pix.size, nch))
        ov = np.zeros((pix.size, len(objects)))
        _render_tile(vols, grads, est, mode, kinds, params, tf, tf_col, obj_chan,
                     lvl_obj, lvl_iso, lvl_alpha, lvl_tint, lvl_chan, len(chans),
                     origin, spacing, np.asarray(center, float), radius,
                     camera.origin, camera.forward, camera.right, camera.up, camera.half_w, camera.half_h,
                     W, H, r0, rows, uni, camera.lights, camera.intensity, settings.diffuse,
                     settings.step, settings.bisection_tol, settings.alpha_cutoff, oc, ot, ol, ov)
        return oc, ot, ol, ov

    starts = list(range(0, H, settings.tile_rows))
    if settings.workers <= 1:
        parts = [work(r) for r in starts]
    else:
        with ThreadPoolExecutor(max_workers=settings.workers) as ex:
            parts = list(ex.map(work, starts))
    color = np.concatenate([p[0] for p in parts]).reshape(H, W, 3)
    trans = np.concatenate([p[1] for p in parts]).reshape(H, W)
    layers = np.concatenate([p[2] for p in parts]).reshape(H, W, nch)
    cov = np.concatenate([p[3] for p in parts]).reshape(H, W, len(objects))
    radiance = color + trans[..., None] * bg
    return RenderResult(radiance, 1.0 - trans, bg, layers, chans, cov, [o.name for o in objects], camera,
                        {"spp": spp, "seed": settings.seed, "step": settings.step})


def render_preset(preset: int, settings: RenderSettings | None = None, figure10: bool = False,
                  phantom: Phantom | None = None, dims: int = 64, phantom_seed: int = 42,
                  upsample: int = 1) -> RenderResult:
    """Render a BRDF combination preset; ``upsample > 1`` B-spline resamples every volume first."""
    phantom = phantom or generate_phantom(dims=dims, seed=phantom_seed)
    if upsample > 1:
        phantom = Phantom(*(upsample_bspline(v, upsample) for v in phantom.volumes), phantom.spec)
    return render_composite(preset_objects(phantom, preset, figure10), settings)
