import math

import mpmath
import numpy as np
import pytest

from brdfoverlap.brdf.fresnel import (
    FresnelParams,
    f0_from_ior,
    fresnel_conductor,
    fresnel_dielectric,
    fresnel_exact,
    fresnel_schlick,
)
from brdfoverlap.spectral import DomainError


def mp_fresnel(eta, c):
    """Unpolarised dielectric Fresnel at 64 digits."""
    with mpmath.workdps(64):
        eta, c = mpmath.mpf(eta), mpmath.mpf(c)
        g = mpmath.sqrt(eta**2 + c**2 - 1)
        a = (g - c) / (g + c)
        b = (c * (g + c) - 1) / (c * (g - c) + 1)
        return float(a**2 * (1 + b**2) / 2)


def test_normal_incidence():
    fp = FresnelParams(1.5)
    assert np.allclose(fresnel_exact(fp, 1.0), 0.04)
    assert fp.f0 == pytest.approx([0.04] * 3)


def test_grazing_limit():
    fp = FresnelParams(1.5)
    assert np.allclose(fresnel_exact(fp, 1e-9), 1.0, atol=1e-7)
    assert np.allclose(fresnel_exact(fp, 0.0), 1.0)
    assert np.allclose(fresnel_exact(fp, -0.3), 1.0)


def test_high_precision_oracle():
    assert fresnel_dielectric(2.0, 0.5) == pytest.approx(mp_fresnel(2.0, 0.5), rel=1e-14)


@pytest.mark.parametrize("eta", [1.3, 1.5, 2.0, 2.5])
def test_exact_matches_oracle_on_grid(eta):
    for c in np.linspace(0.05, 1.0, 20):
        assert fresnel_dielectric(eta, c) == pytest.approx(mp_fresnel(eta, c), rel=1e-12)


@pytest.mark.parametrize("eta", [1.3, 1.5, 2.0, 2.5])
def test_monotone_towards_grazing(eta):
    c = np.linspace(1.0, 1e-6, 2000)
    f = fresnel_dielectric(eta, c)
    assert np.all(np.diff(f) >= -1e-15)


def test_schlick_endpoints():
    assert fresnel_schlick(0.04, 1.0) == pytest.approx(0.04)
    assert fresnel_schlick(0.04, 0.0) == pytest.approx(1.0)
    assert np.allclose(fresnel_schlick(np.array([0.04, 0.1, 0.5]), 0.5), [0.04 + 0.96 / 32, 0.1 + 0.9 / 32, 0.5 + 0.5 / 32])


@pytest.mark.parametrize("eta", [1.3, 1.5, 2.0, 2.5])
def test_schlick_agrees_at_endpoints(eta):
    f0 = f0_from_ior(eta)
    assert fresnel_schlick(f0, 1.0) == pytest.approx(fresnel_dielectric(eta, 1.0), rel=1e-12)
    assert fresnel_schlick(f0, 1e-9) == pytest.approx(fresnel_dielectric(eta, 1e-9), abs=1e-6)


def test_conductor_reduces_to_dielectric():
    c = np.linspace(0.05, 1, 30)
    assert np.allclose(fresnel_conductor(1.6, 0.0, c), fresnel_dielectric(1.6, c), rtol=1e-12)


def test_conductor_normal_incidence():
    assert fresnel_conductor(1.6, 0.2, 1.0) == pytest.approx(f0_from_ior(1.6, 0.2))


def test_effective_eta_reproduces_f0():
    fp = FresnelParams(1.6, 0.2)
    assert f0_from_ior(fp.effective_eta) == pytest.approx(f0_from_ior(1.6, 0.2))
    with pytest.raises(DomainError):
        FresnelParams(0.9)
