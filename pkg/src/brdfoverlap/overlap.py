"""Flux-overlap metric between two flux lattices and the all-pairs BRDF tournament.

Active pixels carry flux strictly above the threshold. A pixel active in
only one lattice adds its flux to that lattice's side; a pixel active in both
adds ``|a - b|`` to the side with the larger flux. Each side is normalised by
its own active area and the error is the smaller of the two.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr

from .brdf.models import BrdfModel, default_models
from .lattice import FluxLattice
from .scene import Ellipsoid, Light, Scene, Sensor, Sphere, Torus, Transform, trace_samples
from .spectral import DomainError, SpectralSample

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-4


@dataclass(frozen=True)
class OverlapConfig:
    threshold: float = DEFAULT_THRESHOLD
    spp: int = 16
    size: tuple = (128, 128)
    seed: int = 42
    bands: tuple = (0, 1, 2)

    def __post_init__(self):
        if not self.threshold > 0.0:
            raise DomainError(f"threshold must be > 0, got {self.threshold}")
        if self.spp < 1:
            raise DomainError("spp must be >= 1")


@dataclass(frozen=True)
class OverlapResult:
    error: float
    area_a: int
    area_b: int
    overlap1: float
    overlap2: float
    degenerate: bool = False


def _band_values(x) -> np.ndarray:
    if isinstance(x, FluxLattice):
        x = x.cells
    return np.asarray(x, dtype=float)


def active_area(lattice, t: float = DEFAULT_THRESHOLD) -> int:
    """Number of pixels whose flux (band maximum for multi-band lattices) exceeds ``t``."""
    if not t > 0.0:
        raise DomainError("threshold must be > 0")
    v = _band_values(lattice)
    if isinstance(lattice, FluxLattice) or v.ndim == 3:
        v = v.max(axis=-1)
    return int(np.count_nonzero(v > t))


def flux_overlap(a, b, cfg: OverlapConfig | None = None) -> OverlapResult:
    """Overlap error of two single-band lattices (any equal shapes)."""
    t = (cfg or OverlapConfig()).threshold
    a = _band_values(a)
    b = _band_values(b)
    if isinstance(a, np.ndarray) and a.ndim == 3 and a.shape[-1] == 1:
        a, b = a[..., 0], b[..., 0]
    if a.shape != b.shape:
        raise DomainError(f"lattice dimensions differ: {a.shape} vs {b.shape}")
    a, b = a.ravel(), b.ravel()
    act_a = a > t
    act_b = b > t
    both = act_a & act_b
    dist = np.abs(a - b)
    c = np.where(act_a & ~act_b, a, 0.0) + np.where(both & (a > b), dist, 0.0)
    d = np.where(act_b & ~act_a, b, 0.0) + np.where(both & (b > a), dist, 0.0)
    area_a = int(act_a.sum())
    area_b = int(act_b.sum())
    if area_a == 0 or area_b == 0:
        return OverlapResult(0.0, area_a, area_b, 0.0, 0.0, degenerate=True)
    o1 = float(c.sum()) / area_a
    o2 = float(d.sum()) / area_b
    return OverlapResult(min(o1, o2), area_a, area_b, o1, o2)


def lattice_overlap(a: FluxLattice, b: FluxLattice, cfg: OverlapConfig | None = None) -> float:
    """Sum over bands of the per-band overlap error."""
    cfg = cfg or OverlapConfig()
    if a.cells.shape != b.cells.shape:
        raise DomainError(f"lattice dimensions differ: {a.cells.shape} vs {b.cells.shape}")
    total = 0.0
    for k in cfg.bands:
        r = flux_overlap(a.band(k), b.band(k), cfg)
        if r.degenerate:
            log.warning("degenerate lattice pair (areas %d, %d) in band %d", r.area_a, r.area_b, k)
        total += r.error
    return total


def is_strong(model: BrdfModel) -> bool:
    tr = model.traits
    return tr.anisotropic and tr.physically_plausible and tr.fresnel


def categorize_pair(p: BrdfModel, q: BrdfModel) -> str:
    if p.name == q.name:
        raise DomainError("a pair needs two distinct models")
    strong = is_strong(p) + is_strong(q)
    return ("low", "medium", "high")[strong]


# Published ranking of the 36 pairs (error, first, second).
PUBLISHED_RANKING = (
    (0.084121, "Ward", "Ashikhmin"),
    (0.046296, "Ashikhmin", "Strauss"),
    (0.040771, "Ashikhmin", "Lafortune"),
    (0.038811, "Ashikhmin", "He-Torrance"),
    (0.036682, "Ward", "Strauss"),
    (0.032664, "Ward", "Lafortune"),
    (0.029034, "Schlick-Lewis", "Ashikhmin"),
    (0.027088, "Poulin-Fournier", "Ashikhmin"),
    (0.024580, "Poulin-Fournier", "Ward"),
    (0.022679, "Schlick-Lewis", "Ward"),
    (0.019312, "Cook-Torrance", "Ashikhmin"),
    (0.017198, "Ward", "He-Torrance"),
    (0.014297, "Cook-Torrance", "Ward"),
    (0.011677, "Ashikhmin", "Phong"),
    (0.008398, "Poulin-Fournier", "Strauss"),
    (0.007648, "Cook-Torrance", "Poulin-Fournier"),
    (0.007432, "Poulin-Fournier", "He-Torrance"),
    (0.006559, "Poulin-Fournier", "Lafortune"),
    (0.005779, "Schlick-Lewis", "Poulin-Fournier"),
    (0.004412, "Cook-Torrance", "Strauss"),
    (0.003778, "Ward", "Phong"),
    (0.003719, "Cook-Torrance", "Lafortune"),
    (0.003660, "Schlick-Lewis", "Lafortune"),
    (0.003131, "Schlick-Lewis", "Strauss"),
    (0.000580, "Poulin-Fournier", "Phong"),
    (0.000275, "Strauss", "Lafortune"),
    (0.000083, "Strauss", "Phong"),
    (0.000066, "Strauss", "He-Torrance"),
    (0.000003, "Lafortune", "Phong"),
    (0.0, "Schlick-Lewis", "Phong"),
    (0.0, "Schlick-Lewis", "He-Torrance"),
    (0.0, "Schlick-Lewis", "Cook-Torrance"),
    (0.0, "Phong", "He-Torrance"),
    (0.0, "Lafortune", "He-Torrance"),
    (0.0, "Cook-Torrance", "Phong"),
    (0.0, "Cook-Torrance", "He-Torrance"),
)


def pair_key(a: str, b: str) -> frozenset:
    return frozenset((a.lower(), b.lower()))


def published_errors() -> dict:
    return {pair_key(a, b): e for e, a, b in PUBLISHED_RANKING}


def published_zero_pairs() -> list:
    return [pair_key(a, b) for e, a, b in PUBLISHED_RANKING if e == 0.0]


@dataclass(frozen=True)
class TournamentRow:
    rank: int
    error: float
    brdf_a: str
    brdf_b: str
    category: str


@dataclass
class TournamentReport:
    rows: list
    scenes: tuple = ()
    meta: dict = field(default_factory=dict)

    def error(self, a: str, b: str) -> float:
        key = pair_key(a, b)
        for r in self.rows:
            if pair_key(r.brdf_a, r.brdf_b) == key:
                return r.error
        raise KeyError(f"pair {a!r}, {b!r} not in report")

    def errors(self) -> dict:
        return {pair_key(r.brdf_a, r.brdf_b): r.error for r in self.rows}

    def category_means(self) -> dict:
        out = {}
        for cat in ("high", "medium", "low"):
            vals = [r.error for r in self.rows if r.category == cat]
            out[cat] = float(np.mean(vals)) if vals else math.nan
        return out

    def monotone(self) -> bool:
        m = self.category_means()
        return m["high"] > m["medium"] > m["low"]

    def spearman_vs_published(self) -> float:
        ref = published_errors()
        mine = self.errors()
        keys = [k for k in ref if k in mine]
        rho, _ = spearmanr([ref[k] for k in keys], [mine[k] for k in keys])
        return float(rho)


def tournament_scenes(size=(128, 128)) -> list:
    """Sphere, 2:1:1 ellipsoid and a torus with ``R = 2r``, each under three point lights."""
    w, h = size
    sensor = Sensor(origin=(0.0, 0.0, 6.0), look_at=(0.0, 0.0, 0.0), width=w, height=h)
    white = SpectralSample.gray(20.0)
    lights = (
        Light((4.0, 4.0, 6.0), white),
        Light((-5.0, 2.0, 5.0), white),
        Light((0.0, -5.0, 4.0), white),
    )
    shapes = (
        Sphere(radius=1.2),
        Ellipsoid(radii=(1.6, 0.8, 0.8), transform=Transform(rotation_deg=(0.0, 30.0, 35.0))),
        Torus(major=1.1, minor=0.55, transform=Transform(rotation_deg=(60.0, 0.0, 20.0))),
    )
    return [Scene((s,), lights, sensor, diffuse_albedo=0.0, name=s.kind) for s in shapes]


def render_lattices(models: Sequence[BrdfModel], scenes: Sequence[Scene], cfg: OverlapConfig) -> dict:
    """Specular flux lattices keyed by ``(model name, scene index)``.

    Primary rays and shadow rays are traced once per scene; only the BRDF
    changes between the lattices of one scene.
    """
    out = {}
    for si, scene in enumerate(scenes):
        samples = trace_samples(scene, scene.sensor, cfg.spp, cfg.seed)
        for m in models:
            cells = samples.shade([m], scene.diffuse_albedo)
            out[(m.name, si)] = FluxLattice(cells, {"brdf": m.name, "scene": scene.name, "bands": 3})
    return out


def run_tournament(models: Sequence[BrdfModel] | None = None, scenes: Sequence[Scene] | None = None,
                   cfg: OverlapConfig | None = None, lattices: dict | None = None) -> TournamentReport:
    cfg = cfg or OverlapConfig()
    models = list(models) if models is not None else default_models()
    if len(models) < 2:
        raise DomainError("a tournament needs at least two models")
    scenes = list(scenes) if scenes is not None else tournament_scenes(cfg.size)
    if not scenes:
        raise DomainError("a tournament needs at least one scene")
    if lattices is None:
        lattices = render_lattices(models, scenes, cfg)
    rows = []
    for p, q in itertools.combinations(models, 2):
        err = sum(lattice_overlap(lattices[(p.name, si)], lattices[(q.name, si)], cfg) for si in range(len(scenes)))
        rows.append((err, p.display_name, q.display_name, categorize_pair(p, q)))
    rows.sort(key=lambda r: (-r[0], r[1], r[2]))
    ranked = [TournamentRow(i + 1, e, a, b, c) for i, (e, a, b, c) in enumerate(rows)]
    return TournamentReport(ranked, tuple(s.name for s in scenes),
                            {"threshold": cfg.threshold, "spp": cfg.spp, "size": cfg.size, "seed": cfg.seed})
