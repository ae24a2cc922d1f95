"""Compiled scalar kernels for the nine specular BRDFs.

Every kernel takes the light direction ``(wx, wy, wz)`` and the view
direction ``(vx, vy, vz)`` in the local shading frame (normal = +z,
tangent = +x), plus a packed parameter vector built by the Python model
classes. The same kernels serve the analysers, the flux renderer and the
volume renderer so that all of them shade identically.
"""

import math

import numpy as np
from numba import njit

PHONG = 0
STRAUSS = 1
SCHLICK_LEWIS = 2
WARD = 3
COOK_TORRANCE = 4
POULIN_FOURNIER = 5
HE_TORRANCE = 6
LAFORTUNE = 7
ASHIKHMIN = 8
LAMBERT = 9  # analytic test double, not one of the nine

N_PARAMS = 12
GRAZING_EPS = 1e-9

# Strauss (1990) constants
STRAUSS_KF = 1.12
STRAUSS_KG = 1.01
STRAUSS_KJ = 0.1


@njit(cache=True, nogil=True)
def fresnel_dielectric_scalar(eta, c):
    if c <= 0.0:
        return 1.0
    g = math.sqrt(eta * eta + c * c - 1.0)
    a = (g - c) / (g + c)
    b = (c * (g + c) - 1.0) / (c * (g - c) + 1.0)
    f = 0.5 * a * a * (1.0 + b * b)
    return min(f, 1.0)


@njit(cache=True, nogil=True)
def fresnel_conductor_scalar(eta, kappa, c):
    if c <= 0.0:
        return 1.0
    n = complex(eta, kappa)
    n2 = n * n
    root = np.sqrt(n2 - (1.0 - c * c))
    rs = (c - root) / (c + root)
    rp = (n2 * c - root) / (n2 * c + root)
    return 0.5 * (abs(rs) ** 2 + abs(rp) ** 2)


@njit(cache=True, nogil=True)
def _mirror_dot(wx, wy, wz, vx, vy, vz):
    # (mirror of w about +z) . v
    return -wx * vx - wy * vy + wz * vz


@njit(cache=True, nogil=True)
def phong(p, wx, wy, wz, vx, vy, vz):
    t = _mirror_dot(wx, wy, wz, vx, vy, vz)
    if t <= 0.0:
        return 0.0
    return p[1] * t ** p[0]


@njit(cache=True, nogil=True)
def _strauss_f(x):
    kf = STRAUSS_KF
    return (1.0 / (x - kf) ** 2 - 1.0 / kf ** 2) / (1.0 / (1.0 - kf) ** 2 - 1.0 / kf ** 2)


@njit(cache=True, nogil=True)
def _strauss_g(x):
    kg = STRAUSS_KG
    return (1.0 / (1.0 - kg) ** 2 - 1.0 / (x - kg) ** 2) / (1.0 / (1.0 - kg) ** 2 - 1.0 / kg ** 2)


@njit(cache=True, nogil=True)
def strauss(p, wx, wy, wz, vx, vy, vz):
    s, metal, color, transp = p[0], p[1], p[2], p[3]
    t = _mirror_dot(wx, wy, wz, vx, vy, vz)
    if t <= 0.0:
        return 0.0
    half_pi = 0.5 * math.pi
    xi = math.acos(min(1.0, wz)) / half_pi
    xo = math.acos(min(1.0, vz)) / half_pi
    rd = (1.0 - s * s * s) * (1.0 - transp)
    rn = (1.0 - transp) - rd
    h = 3.0 / (1.0 - s)
    fi = _strauss_f(xi)
    j = fi * _strauss_g(xi) * _strauss_g(xo)
    rj = min(1.0, rn + (rn + STRAUSS_KJ) * j)
    cs = 1.0 + metal * (1.0 - fi) * (color - 1.0)
    return t ** h * rj * cs


@njit(cache=True, nogil=True)
def schlick_lewis(p, wx, wy, wz, vx, vy, vz):
    n, ks, norm = p[0], p[1], p[2]
    t = _mirror_dot(wx, wy, wz, vx, vy, vz)
    if t <= 0.0:
        return 0.0
    return ks * norm * t / (n - n * t + t)


@njit(cache=True, nogil=True)
def _half(wx, wy, wz, vx, vy, vz):
    hx, hy, hz = wx + vx, wy + vy, wz + vz
    ln = math.sqrt(hx * hx + hy * hy + hz * hz)
    return hx / ln, hy / ln, hz / ln


@njit(cache=True, nogil=True)
def ward(p, wx, wy, wz, vx, vy, vz):
    ax, ay, rho = p[0], p[1], p[2]
    hx, hy, hz = _half(wx, wy, wz, vx, vy, vz)
    if hz <= 0.0:
        return 0.0
    # tan^2(delta) (cos^2 phi / ax^2 + sin^2 phi / ay^2)
    e = (hx * hx / (ax * ax) + hy * hy / (ay * ay)) / (hz * hz)
    return rho / (4.0 * math.pi * ax * ay * math.sqrt(wz * vz)) * math.exp(-e)


@njit(cache=True, nogil=True)
def cook_torrance(p, wx, wy, wz, vx, vy, vz):
    m, eta, ks = p[0], p[1], p[2]
    hx, hy, hz = _half(wx, wy, wz, vx, vy, vz)
    if hz <= 0.0:
        return 0.0
    c = wx * hx + wy * hy + wz * hz
    c2 = hz * hz
    tan2 = (1.0 - c2) / c2
    d = math.exp(-tan2 / (m * m)) / (m * m * c2 * c2)
    g = min(1.0, min(2.0 * hz * vz / c, 2.0 * hz * wz / c))
    f = fresnel_dielectric_scalar(eta, c)
    return ks * f * d * g / (4.0 * math.pi * wz * vz)


@njit(cache=True, nogil=True)
def _pf_blocked(px, py, dx, dy, d, skip_self):
    for k in range(-3, 4):
        if k == 0 and skip_self:
            continue
        qx = px - k * d
        qy = py
        b = qx * dx + qy * dy
        c = qx * qx + qy * qy - 1.0
        disc = b * b - c
        if disc > 0.0:
            s = -b - math.sqrt(disc)
            if s > 1e-9:
                return True
            if c < 0.0:
                return True
    return False


@njit(cache=True, nogil=True)
def _pf_phong(nx, ny, nz, wx, wy, wz, vx, vy, vz, shin):
    nl = nx * wx + ny * wy + nz * wz
    if nl <= 0.0:
        return 0.0
    rx = 2.0 * nl * nx - wx
    ry = 2.0 * nl * ny - wy
    rz = 2.0 * nl * nz - wz
    t = rx * vx + ry * vy + rz * vz
    if t <= 0.0:
        return 0.0
    return t ** shin * nl


@njit(cache=True, nogil=True)
def _simpson_weight(i, n):
    if i == 0 or i == n - 1:
        return 1.0
    return 4.0 if i % 2 == 1 else 2.0


@njit(cache=True, nogil=True)
def _pf_one_orientation(alpha, d, h, shin, nodes, wx, wy, wz, vx, vy, vz):
    # cross-section basis: e1 across the cylinders, e2 = macro normal
    e1x, e1y = -math.sin(alpha), math.cos(alpha)
    wl1 = wx * e1x + wy * e1y
    vl1 = vx * e1x + vy * e1y
    ln_w = math.sqrt(wl1 * wl1 + wz * wz)
    ln_v = math.sqrt(vl1 * vl1 + vz * vz)
    lw1, lw2 = wl1 / ln_w, wz / ln_w
    lv1, lv2 = vl1 / ln_v, vz / ln_v
    beta_v = math.atan2(lv1, lv2)
    num = 0.0
    den = 0.0
    # cylinder arc facing the viewer
    a0 = beta_v - 0.5 * math.pi
    step = math.pi / (nodes - 1)
    for i in range(nodes):
        psi = a0 + i * step
        sp, cp = math.sin(psi), math.cos(psi)
        if cp < -h:  # below the floor
            continue
        nx, ny, nz = sp * e1x, sp * e1y, cp
        nv = nx * vx + ny * vy + nz * vz
        if nv <= 0.0 or _pf_blocked(sp, cp, lv1, lv2, d, True):
            continue
        wgt = _simpson_weight(i, nodes) * step * nv
        den += wgt
        if (sp * lw1 + cp * lw2) > 0.0 and not _pf_blocked(sp, cp, lw1, lw2, d, True):
            num += wgt * _pf_phong(nx, ny, nz, wx, wy, wz, vx, vy, vz, shin)
    # floor strip between neighbouring cylinders
    if d > 2.0 and h >= 0.0:
        x0 = math.sqrt(max(0.0, 1.0 - h * h))
        x1 = d - x0
        if x1 > x0:
            fstep = (x1 - x0) / (nodes - 1)
            for i in range(nodes):
                fx = x0 + i * fstep
                if _pf_blocked(fx, -h, lv1, lv2, d, False):
                    continue
                wgt = _simpson_weight(i, nodes) * fstep * vz
                den += wgt
                if not _pf_blocked(fx, -h, lw1, lw2, d, False):
                    num += wgt * _pf_phong(0.0, 0.0, 1.0, wx, wy, wz, vx, vy, vz, shin)
    # Simpson's 1/3 factor cancels in num/den
    return num, den


@njit(cache=True, nogil=True)
def poulin_fournier(p, wx, wy, wz, vx, vy, vz):
    d, h, shin, ks = p[0], p[1], p[2], p[3]
    nodes = int(p[4])
    n_orient = int(p[5])
    num = 0.0
    den = 0.0
    for k in range(n_orient):
        a, b = _pf_one_orientation(k * math.pi / n_orient, d, h, shin, nodes, wx, wy, wz, vx, vy, vz)
        num += a
        den += b
    if den <= 0.0:
        return 0.0
    return ks * num / (den * wz)


@njit(cache=True, nogil=True)
def _ht_lambda(cot, s_over_t):
    # Smith shadowing term for a Gaussian surface with rms slope sqrt(2) sigma / tau
    x = cot / (2.0 * s_over_t)
    return 0.5 * (2.0 / math.sqrt(math.pi) * s_over_t / cot * math.exp(-x * x) - math.erfc(x))


@njit(cache=True, nogil=True)
def _ht_shadow(cos_t, s_over_t):
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    if sin_t < 1e-12:
        return 1.0
    cot = cos_t / sin_t
    return (1.0 - 0.5 * math.erfc(cot / (2.0 * s_over_t))) / (_ht_lambda(cot, s_over_t) + 1.0)


@njit(cache=True, nogil=True)
def _ht_k(cos_t, t_over_s):
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    if sin_t < 1e-12:
        return 0.0
    return sin_t / cos_t * math.erfc(0.5 * t_over_s * cos_t / sin_t)


@njit(cache=True, nogil=True)
def _ht_effective_sigma(sigma, tau, ci, cr):
    a = 0.25 * (_ht_k(ci, tau / sigma) + _ht_k(cr, tau / sigma))
    if a <= 0.0:
        return sigma
    # sqrt(pi/2) u = a exp(-u^2/2), u = z0 / sigma
    c = math.sqrt(0.5 * math.pi)
    u = 0.0
    for _ in range(60):
        e = a * math.exp(-0.5 * u * u)
        f = c * u - e
        u_new = u - f / (c + u * e)
        if abs(u_new - u) < 1e-15:
            u = u_new
            break
        u = u_new
    return sigma / math.sqrt(1.0 + u * u)


@njit(cache=True, nogil=True)
def _ht_distribution(g, tau, vxy2):
    # (pi^2 tau^2 / 4) sum_m g^m e^-g / (m! m) exp(-tau^2 vxy^2 / 4m), lengths in wavelengths.
    # Poisson weights are walked outwards from the mode by recurrence.
    if g <= 0.0:
        return 0.0
    a = tau * tau * vxy2 / 4.0
    mode = max(1, int(g))
    p_mode = math.exp(mode * math.log(g) - g - math.lgamma(mode + 1.0))
    cutoff = 1e-17 * p_mode
    total = p_mode / mode * math.exp(-a / mode)
    pm = p_mode
    m = mode
    while True:
        m += 1
        pm *= g / m
        total += pm / m * math.exp(-a / m)
        if pm < cutoff:
            break
    pm = p_mode
    m = mode
    while m > 1:
        pm *= m / g
        m -= 1
        total += pm / m * math.exp(-a / m)
        if pm < cutoff:
            break
    return math.pi * math.pi * tau * tau / 4.0 * total


@njit(cache=True, nogil=True)
def he_torrance_band(p, band, wx, wy, wz, vx, vy, vz):
    tau = p[band]
    sigma = p[3 + band]
    eta, kappa, ks = p[6], p[7], p[8]
    ci, cr = wz, vz
    sx, sy, sz = wx + vx, wy + vy, wz + vz
    vv = sx * sx + sy * sy + sz * sz
    if vv < 1e-24:
        return 0.0
    vxy2 = (2.0 * math.pi) ** 2 * (sx * sx + sy * sy)
    s0 = _ht_effective_sigma(sigma, tau, ci, cr)
    g = (2.0 * math.pi * s0 * (ci + cr)) ** 2
    dist = _ht_distribution(g, tau, vxy2)
    geo = (vv / sz) ** 2
    shadow = _ht_shadow(ci, sigma / tau) * _ht_shadow(cr, sigma / tau)
    c_local = (wx * sx + wy * sy + wz * sz) / math.sqrt(vv)
    f = fresnel_conductor_scalar(eta, kappa, c_local)
    return ks * f * geo * shadow * dist / (math.pi * ci * cr)


@njit(cache=True, nogil=True)
def lafortune(p, wx, wy, wz, vx, vy, vz):
    base = p[0] * wx * vx + p[1] * wy * vy + p[2] * wz * vz
    if base <= 0.0:
        return 0.0
    return base ** p[3]


@njit(cache=True, nogil=True)
def ashikhmin(p, wx, wy, wz, vx, vy, vz):
    nu, nv, rs = p[0], p[1], p[2]
    hx, hy, hz = _half(wx, wy, wz, vx, vy, vz)
    if hz <= 0.0:
        return 0.0
    kh = wx * hx + wy * hy + wz * hz
    s2 = 1.0 - hz * hz
    if s2 < 1e-14:
        lobe = 1.0
    else:
        lobe = hz ** ((nu * hx * hx + nv * hy * hy) / s2)
    fr = rs + (1.0 - rs) * (1.0 - kh) ** 5
    return math.sqrt((nu + 1.0) * (nv + 1.0)) / (8.0 * math.pi) * lobe / (kh * max(wz, vz)) * fr


@njit(cache=True, nogil=True)
def eval_band(kind, p, band, wx, wy, wz, vx, vy, vz):
    if wz <= GRAZING_EPS or vz <= GRAZING_EPS:
        return 0.0
    if kind == PHONG:
        return phong(p, wx, wy, wz, vx, vy, vz)
    if kind == STRAUSS:
        return strauss(p, wx, wy, wz, vx, vy, vz)
    if kind == SCHLICK_LEWIS:
        return schlick_lewis(p, wx, wy, wz, vx, vy, vz)
    if kind == WARD:
        return ward(p, wx, wy, wz, vx, vy, vz)
    if kind == COOK_TORRANCE:
        return cook_torrance(p, wx, wy, wz, vx, vy, vz)
    if kind == POULIN_FOURNIER:
        return poulin_fournier(p, wx, wy, wz, vx, vy, vz)
    if kind == HE_TORRANCE:
        return he_torrance_band(p, band, wx, wy, wz, vx, vy, vz)
    if kind == LAFORTUNE:
        return lafortune(p, wx, wy, wz, vx, vy, vz)
    if kind == ASHIKHMIN:
        return ashikhmin(p, wx, wy, wz, vx, vy, vz)
    if kind == LAMBERT:
        return p[0] / math.pi
    return 0.0


@njit(cache=True, nogil=True)
def eval_rgb(kind, p, wx, wy, wz, vx, vy, vz, out):
    """Fill ``out[0:3]``; only He-Torrance varies across bands."""
    if kind == HE_TORRANCE:
        for b in range(3):
            out[b] = eval_band(kind, p, b, wx, wy, wz, vx, vy, vz)
    else:
        v = eval_band(kind, p, 0, wx, wy, wz, vx, vy, vz)
        out[0] = v
        out[1] = v
        out[2] = v


@njit(cache=True, nogil=True)
def eval_many(kind, p, wi, wo, out):
    tmp = np.empty(3)
    for i in range(wi.shape[0]):
        eval_rgb(kind, p, wi[i, 0], wi[i, 1], wi[i, 2], wo[i, 0], wo[i, 1], wo[i, 2], tmp)
        out[i, 0] = tmp[0]
        out[i, 1] = tmp[1]
        out[i, 2] = tmp[2]
