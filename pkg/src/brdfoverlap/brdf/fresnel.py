"""Fresnel reflectance: the exact dielectric form and Schlick's approximation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..spectral import N_BANDS, DomainError


def f0_from_ior(eta: float, kappa: float = 0.0) -> float:
    """Reflectance at normal incidence for complex index ``eta + i*kappa``."""
    k2 = kappa * kappa
    return ((eta - 1.0) ** 2 + k2) / ((eta + 1.0) ** 2 + k2)


def ior_from_f0(f0):
    """Real index whose normal-incidence reflectance is ``f0``."""
    s = np.sqrt(np.asarray(f0, dtype=float))
    return (1.0 + s) / (1.0 - s)


@dataclass(frozen=True)
class FresnelParams:
    eta: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.eta < 1.0:
            raise DomainError(f"eta must be >= 1, got {self.eta}")

    @property
    def f0(self) -> np.ndarray:
        return np.full(N_BANDS, f0_from_ior(self.eta, abs(self.kappa)))

    @property
    def effective_eta(self) -> float:
        """Real index reproducing :attr:`f0`; equals ``eta`` when ``kappa == 0``."""
        if self.kappa == 0.0:
            return self.eta
        return float(ior_from_f0(f0_from_ior(self.eta, abs(self.kappa))))


def fresnel_dielectric(eta, c):
    """Unpolarised reflectance with ``g**2 = eta**2 + c**2 - 1``; ``c <= 0`` gives 1."""
    eta = np.asarray(eta, dtype=float)
    c = np.asarray(c, dtype=float)
    cc = np.clip(c, 1e-300, 1.0)
    g = np.sqrt(eta * eta + cc * cc - 1.0)
    a = (g - cc) / (g + cc)
    b = (cc * (g + cc) - 1.0) / (cc * (g - cc) + 1.0)
    f = 0.5 * a * a * (1.0 + b * b)
    return np.where(c > 0.0, np.minimum(f, 1.0), 1.0)


def fresnel_exact(fp: FresnelParams, cos_half_angle):
    """Per-band reflectance for the cosine between incident and half vector.

    Returns an array with a trailing band axis of length 3.
    """
    f = fresnel_dielectric(fp.effective_eta, cos_half_angle)
    return np.repeat(np.asarray(f)[..., None], N_BANDS, axis=-1)


def fresnel_schlick(f0, cos_angle):
    """``f0 + (1 - f0) (1 - cos)^5`` broadcast over bands."""
    f0 = np.asarray(f0, dtype=float)
    c = np.asarray(cos_angle, dtype=float)
    if f0.ndim:
        c = c[..., None]
    return f0 + (1.0 - f0) * (1.0 - c) ** 5


def fresnel_conductor(eta: float, kappa: float, c):
    """Unpolarised reflectance of a complex index ``eta + i*kappa``."""
    c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
    n = complex(eta, kappa)
    n2 = n * n
    root = np.sqrt(n2 - (1.0 - c * c) + 0j)
    rs = (c - root) / (c + root)
    rp = (n2 * c - root) / (n2 * c + root)
    return 0.5 * (np.abs(rs) ** 2 + np.abs(rp) ** 2)
