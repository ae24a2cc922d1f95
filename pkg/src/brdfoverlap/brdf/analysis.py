"""Physical-plausibility analysers: Monte Carlo albedo and reciprocity probes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..spectral import Direction, spherical_to_cartesian_array
from .models import BrdfModel

PROBE_ANGLES_DEG = (0.0, 30.0, 60.0, 80.0)
RECIPROCITY_TOL = 1e-6
_EPS = 1e-12


@dataclass(frozen=True)
class AlbedoEstimate:
    value: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class PlausibilityReport:
    model: str
    albedo_max: float
    stderr: float
    reciprocity_max_err: float
    traits: tuple[str, ...] = ()
    score: int = 0

    @property
    def passes_energy(self) -> bool:
        return self.albedo_max <= 1.0 + 3.0 * self.stderr

    @property
    def passes_reciprocity(self) -> bool:
        return self.reciprocity_max_err <= RECIPROCITY_TOL


def cosine_hemisphere(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Map two uniforms to directions with density ``cos(theta) / pi``."""
    r = np.sqrt(u1)
    phi = 2.0 * np.pi * u2
    z = np.sqrt(np.maximum(0.0, 1.0 - u1))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def uniform_hemisphere(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    z = u1
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = 2.0 * np.pi * u2
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def albedo(model: BrdfModel, incident, samples: int = 1_000_000, seed: int = 0,
           band: int | None = None) -> AlbedoEstimate:
    """Directional albedo for a local-frame incident direction.

    Cosine-weighted sampling turns each sample into ``pi * f``. With ``band``
    unset the largest band estimate is returned.
    """
    if samples < 10_000:
        raise ValueError("albedo needs at least 1e4 samples")
    wi = incident.as_array() if isinstance(incident, Direction) else np.asarray(incident, dtype=float)
    rng = np.random.default_rng(seed)
    est = np.empty((0, 3))
    chunk = 250_000
    means, sq = np.zeros(3), np.zeros(3)
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        u = rng.random((n, 2))
        wo = cosine_hemisphere(u[:, 0], u[:, 1])
        est = np.pi * model.evaluate(wi, wo)
        means += est.sum(axis=0)
        sq += (est * est).sum(axis=0)
        done += n
    mean = means / samples
    var = np.maximum(sq / samples - mean * mean, 0.0)
    stderr = np.sqrt(var / (samples - 1))
    b = int(np.argmax(mean)) if band is None else band
    return AlbedoEstimate(float(mean[b]), float(stderr[b]), samples)


def albedo_at(model: BrdfModel, theta_deg: float, samples: int = 1_000_000, seed: int = 0) -> AlbedoEstimate:
    t = math.radians(theta_deg)
    return albedo(model, np.array([math.sin(t), 0.0, math.cos(t)]), samples, seed)


def reciprocity_error(model: BrdfModel, pairs: int = 1000, seed: int = 0) -> float:
    """Largest ``|f(i->o) - f(o->i)| / max(f(i->o), 1e-12)`` over random hemisphere pairs."""
    if pairs < 1000:
        raise ValueError("reciprocity check needs at least 1e3 pairs")
    rng = np.random.default_rng(seed)
    u = rng.random((pairs, 4))
    wi = uniform_hemisphere(u[:, 0], u[:, 1])
    wo = uniform_hemisphere(u[:, 2], u[:, 3])
    return asymmetry(model, wi, wo)


def asymmetry(model, wi, wo) -> float:
    fwd = model(wi, wo)
    bwd = model(wo, wi)
    return float(np.max(np.abs(fwd - bwd) / np.maximum(fwd, _EPS)))


def check_reciprocity(model: BrdfModel, pairs: int = 1000, seed: int = 0) -> PlausibilityReport:
    err = reciprocity_error(model, pairs, seed)
    return PlausibilityReport(model.display_name, math.nan, math.nan, err,
                              tuple(model.traits.labels()), model.traits.score())


def plausibility(model: BrdfModel, samples: int = 1_000_000, pairs: int = 1000, seed: int = 0,
                 angles_deg: Sequence[float] = PROBE_ANGLES_DEG) -> PlausibilityReport:
    estimates = [albedo_at(model, a, samples, seed + i) for i, a in enumerate(angles_deg)]
    worst = max(estimates, key=lambda e: e.value)
    return PlausibilityReport(
        model=model.display_name,
        albedo_max=worst.value,
        stderr=worst.stderr,
        reciprocity_max_err=reciprocity_error(model, pairs, seed),
        traits=tuple(model.traits.labels()),
        score=model.traits.score(),
    )


def rotate_about_normal(w: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    out = np.array(w, dtype=float, copy=True)
    out[..., 0] = c * w[..., 0] - s * w[..., 1]
    out[..., 1] = s * w[..., 0] + c * w[..., 1]
    return out


def anisotropy_change(model: BrdfModel, probes: int = 500, seed: int = 0, angle: float = math.pi / 2) -> float:
    """Largest relative change of ``f`` when both directions turn jointly about the normal."""
    rng = np.random.default_rng(seed)
    th = np.arccos(rng.uniform(0.2, 1.0, (probes, 2)))
    ph = rng.uniform(0.0, 2.0 * np.pi, (probes, 2))
    wi = spherical_to_cartesian_array(th[:, 0], ph[:, 0])
    # view directions clustered around the mirror so every lobe is sampled
    mirror = np.stack([-wi[:, 0], -wi[:, 1], wi[:, 2]], axis=-1)
    jitter = spherical_to_cartesian_array(0.3 * th[:, 1], ph[:, 1])
    wo = mirror + jitter - np.array([0.0, 0.0, 1.0])
    wo[:, 2] = np.abs(wo[:, 2]) + 0.05
    wo /= np.linalg.norm(wo, axis=-1, keepdims=True)
    f0 = model(wi, wo)
    f1 = model(rotate_about_normal(wi, angle), rotate_about_normal(wo, angle))
    mask = f0 > 1e-12
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(f1 - f0)[mask] / f0[mask]))


REPORT_FIELDS = ("model", "albedo_max", "stderr", "reciprocity_max_err",
                 "passes_energy", "passes_reciprocity", "traits", "score")


def write_plausibility_csv(reports: Sequence[PlausibilityReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_FIELDS)
        for r in reports:
            w.writerow([r.model, f"{r.albedo_max:.6f}", f"{r.stderr:.6f}", f"{r.reciprocity_max_err:.3e}",
                        r.passes_energy, r.passes_reciprocity, "; ".join(r.traits) or "None", r.score])
