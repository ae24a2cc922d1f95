import math

import numpy as np
import pytest

from brdfoverlap.brdf.models import Lambertian, Phong, Ward
from brdfoverlap.scene import (
    Ellipsoid,
    Light,
    Scene,
    Sensor,
    Sphere,
    Torus,
    Transform,
    direct_radiance,
    geometry_term,
    measure_flux,
    raycast,
    visibility,
)
from brdfoverlap.spectral import Direction, DomainError, SpectralSample


def unit_sphere_scene(**kw):
    return Scene((Sphere(radius=1.0, **kw),))


def test_raycast_hits_unit_sphere():
    hit = raycast(unit_sphere_scene(), (0, 0, 5), Direction(0, 0, -1))
    assert np.allclose(hit.point, (0, 0, 1), atol=1e-12)
    assert hit.distance == pytest.approx(4.0)
    assert np.allclose(hit.frame.normal.as_array(), (0, 0, 1))


def test_raycast_pointing_away_misses():
    assert raycast(unit_sphere_scene(), (0, 0, 5), Direction(0, 0, 1)) is None


def test_raycast_through_torus_hole_misses():
    scene = Scene((Torus(major=2.0, minor=0.5),))
    assert raycast(scene, (0, 0, 5), Direction(0, 0, -1)) is None
    hit = raycast(scene, (2, 0, 5), Direction(0, 0, -1))
    assert hit.point[2] == pytest.approx(0.5, abs=1e-7)


def test_raycast_ellipsoid_and_transform():
    scene = Scene((Ellipsoid(radii=(2.0, 1.0, 1.0), transform=Transform(translation=(0, 0, -1))),))
    hit = raycast(scene, (0, 0, 5), Direction(0, 0, -1))
    assert hit.distance == pytest.approx(5.0)
    rot = Scene((Ellipsoid(radii=(2.0, 1.0, 1.0), transform=Transform(rotation_deg=(0, 90, 0))),))
    assert raycast(rot, (0, 0, 5), Direction(0, 0, -1)).distance == pytest.approx(3.0)


def test_raycast_rejects_non_unit_direction():
    with pytest.raises(DomainError):
        raycast(unit_sphere_scene(), (0, 0, 5), np.array([0.0, 0.0, -2.0]))


def test_visibility_examples():
    assert visibility(Scene(), (0, 0, 0), (3, 4, 5)) == 1
    assert visibility(unit_sphere_scene(), (0, 0, -5), (0, 0, 5)) == 0
    assert visibility(unit_sphere_scene(), (0, 0, 5), (0, 0, 1)) == 1
    with pytest.raises(DomainError):
        visibility(Scene(), (1, 1, 1), (1, 1, 1))


def test_geometry_term_examples():
    assert geometry_term((0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 0, -1)) == pytest.approx(0.25)
    occluded = Scene((Sphere(radius=0.5, transform=Transform(translation=(0, 0, 1))),))
    assert geometry_term((0, 0, -1), (0, 0, 1), (0, 0, 3), (0, 0, -1), occluded) == 0.0
    assert geometry_term((0, 0, 0), (0, 0, 1), (0, 0, 2), (1, 0, 0)) == 0.0
    with pytest.raises(DomainError):
        geometry_term((0, 0, 0), (0, 0, 1), (0, 0, 0), (0, 0, -1))


def test_direct_radiance_without_lights():
    scene = unit_sphere_scene()
    hit = raycast(scene, (0, 0, 5), Direction(0, 0, -1))
    assert direct_radiance(scene, hit, Direction(0, 0, 1)).as_array().tolist() == [0, 0, 0]


def test_direct_radiance_in_shadow():
    scene = Scene((Sphere(radius=1.0), Sphere(radius=0.5, transform=Transform(translation=(0, 0, 3)))),
                  (Light((0, 0, 6), SpectralSample.gray(10.0)),))
    hit = raycast(scene, (0, 0, 2.2), Direction(0, 0, -1))
    assert hit.object_id == 0
    assert np.all(direct_radiance(scene, hit, Direction(0, 0, 1)).as_array() == 0.0)


def test_direct_radiance_phong_scalar_oracle():
    light = np.array([0.0, 8.0, 6.0])
    scene = Scene((Sphere(radius=1.0, brdf=Phong()),), (Light(tuple(light), SpectralSample.gray(5.0)),),
                  diffuse_albedo=0.0)
    x = np.array([0.0, math.sin(0.4), math.cos(0.4)])
    n = x.copy()
    to_light = light - x
    d2 = float(to_light @ to_light)
    li = to_light / math.sqrt(d2)
    view = 2 * (li @ n) * n - li
    hit = raycast(scene, x + 3 * view, Direction(*(-view)))
    got = direct_radiance(scene, hit, Direction(*view)).as_array()
    r = 2 * (li @ n) * n - li
    expected = 0.8 * max(r @ view, 0.0) ** 10 * 5.0 * (li @ n) / d2
    assert np.allclose(got, expected, rtol=1e-9)
    with_diffuse = Scene(scene.objects, scene.lights, diffuse_albedo=0.2)
    got2 = direct_radiance(with_diffuse, hit, Direction(*view)).as_array()
    assert np.allclose(got2 - got, 0.2 / math.pi * 5.0 * (li @ n) / d2, rtol=1e-9)


def lit_scene(intensity=20.0, brdf=None):
    brdf = brdf or Ward()
    return Scene((Sphere(radius=1.2, brdf=brdf),),
                 (Light((3, 3, 5), SpectralSample.gray(intensity)), Light((-4, 1, 4), SpectralSample(5.0, 10.0, 2.0))),
                 Sensor(width=24, height=24))


def test_lights_off_gives_zero_lattice():
    lat = measure_flux(lit_scene(0.0).with_lights([]), spp=2)
    assert np.all(lat.cells == 0.0)
    lat = measure_flux(lit_scene(0.0).with_lights([Light((3, 3, 5), SpectralSample.gray(0.0))]), spp=2)
    assert np.all(lat.cells == 0.0)


def test_doubling_emission_doubles_flux_exactly():
    scene = lit_scene()
    base = measure_flux(scene, spp=3, seed=4)
    twice = measure_flux(scene.with_lights([l.scaled(2.0) for l in scene.lights]), spp=3, seed=4)
    assert np.array_equal(twice.cells, 2.0 * base.cells)


def test_flux_lattice_is_finite_and_nonnegative():
    lat = measure_flux(lit_scene(), spp=2)
    assert np.all(np.isfinite(lat.cells)) and np.all(lat.cells >= 0) and lat.cells.max() > 0


def test_zero_size_lattice_rejected():
    with pytest.raises(DomainError):
        measure_flux(lit_scene(), Sensor(width=0, height=4))


@pytest.mark.parametrize("workers,tile_rows", [(4, 3), (16, 1), (2, 24)])
def test_measure_flux_independent_of_workers(workers, tile_rows):
    scene = lit_scene()
    ref = measure_flux(scene, spp=3, seed=9, workers=1)
    got = measure_flux(scene, spp=3, seed=9, workers=workers, tile_rows=tile_rows)
    assert np.array_equal(ref.cells, got.cells)


def single_pixel_oracle(sensor, radius, light, intensity, rho, n=600):
    """Midpoint rule over the pixel of L cos^4 for a huge sphere whose top sits at z = 0."""
    hw, hh = sensor.half_extent
    s = (np.arange(n) + 0.5) / n
    x, y = np.meshgrid((-1 + 2 * s) * hw, (1 - 2 * s) * hh)
    d = np.stack([x, y, -np.ones_like(x)], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    o = np.asarray(sensor.origin, float)
    c = np.array([0.0, 0.0, -radius])
    oc = o - c
    b = d @ oc
    t = -b - np.sqrt(b * b - (oc @ oc - radius**2))
    p = o + t[..., None] * d
    nrm = (p - c) / radius
    v = np.asarray(light) - p
    dist2 = np.sum(v * v, axis=-1)
    cos_i = np.maximum(np.sum(v * nrm, axis=-1) / np.sqrt(dist2), 0.0)
    radiance = rho / math.pi * intensity * cos_i / dist2
    return float(np.mean(radiance * (-d[..., 2]) ** 4))


def test_single_pixel_lambertian_quadrature():
    radius = 1000.0
    sensor = Sensor(origin=(0.0, 0.0, 6.0), look_at=(0.0, 0.0, 0.0), fov_deg=40.0, width=1, height=1)
    light = (1.5, -0.5, 3.0)
    scene = Scene((Sphere(radius=radius, brdf=Lambertian(0.0), transform=Transform(translation=(0, 0, -radius))),),
                  (Light(light, SpectralSample.gray(7.0)),), sensor, diffuse_albedo=0.2)
    lat = measure_flux(scene, spp=100_000, seed=1)
    ref = single_pixel_oracle(sensor, radius, light, 7.0, 0.2)
    assert lat.cells[0, 0, 0] == pytest.approx(ref, rel=0.01)


def test_reciprocity_swap_of_camera_and_light():
    # a small patch at x seen from C and lit from P: flux ~ f cos_P cos_C / d^4 is symmetric under C <-> P
    brdf = Ward()
    x = np.array([0.0, 0.0, 1.0])
    c = x + 4.0 * np.array([0.3, -0.2, math.sqrt(1 - 0.13)])
    p = x + 4.0 * np.array([-0.5, 0.4, math.sqrt(1 - 0.41)])

    def patch_flux(cam, lamp):
        scene = Scene((Sphere(radius=1.0, brdf=brdf),), (Light(tuple(lamp), SpectralSample.gray(3.0)),),
                      diffuse_albedo=0.0)
        view = (cam - x) / np.linalg.norm(cam - x)
        hit = raycast(scene, cam, Direction(*(-view)))
        assert np.allclose(hit.point, x, atol=1e-9)
        return direct_radiance(scene, hit, Direction(*view)).as_array() * view[2]

    assert np.allclose(patch_flux(c, p), patch_flux(p, c), rtol=1e-9)


def mirror_point(camera, light, radius):
    x = np.array([0.0, 0.0, radius])
    for _ in range(500):
        a = (camera - x) / np.linalg.norm(camera - x)
        b = (light - x) / np.linalg.norm(light - x)
        h = a + b
        x = radius * h / np.linalg.norm(h)
    return x


@pytest.mark.parametrize("light", [(2.0, 2.0, 6.0), (-3.0, 2.0, 8.0)])
def test_phong_specular_peak_location(light):
    sensor = Sensor(width=256, height=256)
    scene = Scene((Sphere(radius=1.0, brdf=Phong()),), (Light(light, SpectralSample.gray(10.0)),), sensor,
                  diffuse_albedo=0.0)
    img = measure_flux(scene, spp=4, seed=1).cells[..., 0]
    r, c = np.unravel_index(np.argmax(img), img.shape)
    pr, pc = np.floor(sensor.project(mirror_point(np.asarray(sensor.origin), np.asarray(light), 1.0))[0])
    assert abs(r - pr) <= 1 and abs(c - pc) <= 1


def test_light_flux_and_emittance():
    pt = Light((0, 0, 1), SpectralSample.gray(2.0))
    assert np.allclose(pt.flux().as_array(), 8 * math.pi)
    area = Light((0, 0, 1), SpectralSample.gray(2.0), area=0.5)
    assert np.allclose(area.emittance().as_array(), 2 * math.pi)
    assert np.allclose(area.flux().as_array(), math.pi)
