"""Directions, local shading frames, three-band spectral samples and solid angles.

Conventions used throughout the package:

* shading happens in a local frame with the surface normal on ``+z``,
  the tangent on ``+x`` (the anisotropy reference axis) and the bitangent
  on ``+y``;
* every direction handed to a BRDF points *away* from the surface, so the
  light direction and the view direction both live in the upper hemisphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

#: Wavelengths (nm) of the three spectral bands. Band ``i`` maps to display channel ``i``.
WAVELENGTHS_NM = (700.0, 546.1, 435.8)
N_BANDS = 3

_UNIT_TOL = 1e-9
_PARALLEL_TOL = 1e-6


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class SpectralSample:
    """Radiometric quantity sampled at :data:`WAVELENGTHS_NM`."""

    r: float
    g: float
    b: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.r, self.g, self.b)):
            raise DomainError(f"spectral bands must be finite, got {self.bands}")

    @classmethod
    def from_array(cls, values) -> "SpectralSample":
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.shape != (N_BANDS,):
            raise DomainError(f"expected {N_BANDS} bands, got shape {values.shape}")
        return cls(*(float(v) for v in values))

    @classmethod
    def gray(cls, value: float) -> "SpectralSample":
        return cls(value, value, value)

    @property
    def bands(self) -> tuple[float, float, float]:
        return (self.r, self.g, self.b)

    def as_array(self) -> np.ndarray:
        return np.array(self.bands)

    def is_nonnegative(self) -> bool:
        return min(self.bands) >= 0.0

    def __add__(self, other: "SpectralSample") -> "SpectralSample":
        return SpectralSample(self.r + other.r, self.g + other.g, self.b + other.b)

    def __sub__(self, other: "SpectralSample") -> "SpectralSample":
        return SpectralSample(self.r - other.r, self.g - other.g, self.b - other.b)

    def __mul__(self, other):
        if isinstance(other, SpectralSample):
            return SpectralSample(self.r * other.r, self.g * other.g, self.b * other.b)
        s = float(other)
        return SpectralSample(self.r * s, self.g * s, self.b * s)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Direction:
    """Unit vector. Construction normalises nothing; use :meth:`normalized`."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if not abs(n - 1.0) <= _UNIT_TOL:
            raise DomainError(f"direction is not unit length (|v| = {n!r})")

    @classmethod
    def normalized(cls, v: Iterable[float]) -> "Direction":
        a = np.asarray(list(v), dtype=float)
        n = np.linalg.norm(a)
        if n == 0.0 or not np.isfinite(n):
            raise DomainError("cannot normalise a zero or non-finite vector")
        a = a / n
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def theta(self) -> float:
        return math.acos(max(-1.0, min(1.0, self.z)))

    @property
    def phi(self) -> float:
        p = math.atan2(self.y, self.x)
        return p + 2.0 * math.pi if p < 0.0 else p

    def dot(self, other: "Direction") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z


@dataclass(frozen=True)
class SolidAngle:
    value: float  # steradians

    def __post_init__(self):
        if not self.value >= 0.0:
            raise DomainError(f"solid angle must be >= 0, got {self.value}")


FULL_SPHERE = SolidAngle(4.0 * math.pi)


def spherical_to_cartesian(theta: float, phi: float) -> Direction:
    if not (0.0 <= theta <= math.pi):
        raise DomainError(f"theta must lie in [0, pi], got {theta}")
    if not (0.0 <= phi < 2.0 * math.pi):
        raise DomainError(f"phi must lie in [0, 2pi), got {phi}")
    st = math.sin(theta)
    v = np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])
    # re-normalise to keep |v| = 1 at the last ulp
    return Direction(*(v / np.linalg.norm(v)))


def cartesian_to_spherical(d: Direction) -> tuple[float, float]:
    return d.theta, d.phi


def spherical_to_cartesian_array(theta, phi) -> np.ndarray:
    """Vectorised version without range checks; returns ``(..., 3)``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def solid_angle_of_patch(area: float, radius: float) -> SolidAngle:
    if radius <= 0.0:
        raise DomainError(f"radius must be positive, got {radius}")
    if area < 0.0:
        raise DomainError(f"patch area must be >= 0, got {area}")
    return SolidAngle(area / (radius * radius))


def normalize(v: np.ndarray) -> np.ndarray:
    """Normalise along the last axis."""
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass(frozen=True)
class LocalFrame:
    """Orthonormal right-handed shading frame; ``tangent x bitangent = normal``."""

    tangent: Direction
    bitangent: Direction
    normal: Direction
    u: float = 0.0
    v: float = 0.0

    def matrix(self) -> np.ndarray:
        """Rows are tangent, bitangent, normal: ``local = M @ world``."""
        return np.array([self.tangent.as_array(), self.bitangent.as_array(), self.normal.as_array()])

    def to_local(self, w) -> np.ndarray:
        return np.asarray(w, dtype=float) @ self.matrix().T

    def to_world(self, w) -> np.ndarray:
        return np.asarray(w, dtype=float) @ self.matrix()


def _as_vec(d) -> np.ndarray:
    return d.as_array() if isinstance(d, Direction) else np.asarray(d, dtype=float)


def build_frame(normal, tangent_hint) -> LocalFrame:
    """Gram-Schmidt frame around ``normal``.

    A hint within 1e-6 of parallel to the normal is replaced by the global
    ``+x`` axis, and by ``+y`` if that is parallel too.
    """
    n = _as_vec(normal)
    n = n / np.linalg.norm(n)
    for hint in (_as_vec(tangent_hint), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        hint = hint / np.linalg.norm(hint)
        t = hint - np.dot(hint, n) * n
        if np.linalg.norm(t) > _PARALLEL_TOL:
            break
    t = t / np.linalg.norm(t)
    b = np.cross(n, t)
    b = b / np.linalg.norm(b)
    return LocalFrame(Direction(*t), Direction(*b), Direction(*n))


def build_frames(normals: np.ndarray, hint=(1.0, 0.0, 0.0)) -> np.ndarray:
    """Vectorised :func:`build_frame` for a shared hint.

    Returns ``(..., 3, 3)`` matrices whose rows are tangent, bitangent, normal.
    """
    n = normalize(np.asarray(normals, dtype=float))
    out = np.empty(n.shape[:-1] + (3, 3))
    t = np.zeros_like(n)
    todo = np.ones(n.shape[:-1], dtype=bool)
    for h in (np.asarray(hint, dtype=float), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        h = h / np.linalg.norm(h)
        cand = h - (n @ h)[..., None] * n
        ok = todo & (np.linalg.norm(cand, axis=-1) > _PARALLEL_TOL)
        t[ok] = cand[ok]
        todo &= ~ok
    t = normalize(t)
    b = normalize(np.cross(n, t))
    out[..., 0, :] = t
    out[..., 1, :] = b
    out[..., 2, :] = n
    return out
