"""The nine specular reflectance models with their default parameters.

Only the specular part of each model is evaluated; the renderers add a
separate Lambertian constant. Defaults reproduce the parameter set the
flux-overlap study used, written as decimal literals.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from ..spectral import WAVELENGTHS_NM, DomainError, LocalFrame, SpectralSample, _as_vec
from . import _kernels as K
from .fresnel import FresnelParams


@dataclass(frozen=True)
class Traits:
    physically_plausible: bool = False
    fresnel: bool = False
    anisotropic: bool = False
    popular: bool = False

    def score(self) -> int:
        return sum(dataclasses.astuple(self))

    def labels(self) -> list[str]:
        names = {
            "physically_plausible": "Physically plausible",
            "fresnel": "Fresnel behavior",
            "anisotropic": "anisotropic",
            "popular": "Popular",
        }
        return [names[f.name] for f in dataclasses.fields(self) if getattr(self, f.name)]


@dataclass(frozen=True)
class BrdfModel:
    """Base class. Subclasses are frozen dataclasses whose fields are the parameters."""

    kind: ClassVar[int]
    name: ClassVar[str]  # CLI / JSON key
    display_name: ClassVar[str]
    traits: ClassVar[Traits]

    def _validate(self):
        pass

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not math.isfinite(v):
                raise DomainError(f"{self.name}.{f.name} must be finite")
        self._validate()

    def get_params(self) -> dict:
        return dataclasses.asdict(self)

    def with_params(self, **overrides) -> "BrdfModel":
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise KeyError(f"unknown {self.name} parameter(s): {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)

    def packed(self) -> np.ndarray:
        p = np.zeros(K.N_PARAMS)
        vals = self._pack()
        p[: len(vals)] = vals
        return p

    def _pack(self) -> list[float]:
        raise NotImplementedError

    def evaluate(self, wi, wo) -> np.ndarray:
        """Specular BRDF (sr^-1) for local-frame directions; shape ``(..., 3)``.

        ``wi`` points towards the light, ``wo`` towards the viewer. Pairs with
        either cosine <= 1e-9 give zero.
        """
        wi = np.asarray(wi, dtype=float)
        wo = np.asarray(wo, dtype=float)
        shape = np.broadcast_shapes(wi.shape, wo.shape)
        a = np.ascontiguousarray(np.broadcast_to(wi, shape).reshape(-1, 3))
        b = np.ascontiguousarray(np.broadcast_to(wo, shape).reshape(-1, 3))
        out = np.empty_like(a)
        K.eval_many(self.kind, self.packed(), a, b, out)
        return out.reshape(shape)

    def __call__(self, wi, wo) -> np.ndarray:
        return self.evaluate(wi, wo)


@dataclass(frozen=True)
class Phong(BrdfModel):
    """Classical, unnormalised ``ks (R.V)^n``."""

    n: float = 10.0
    ks: float = 0.8

    kind = K.PHONG
    name = "phong"
    display_name = "Phong"
    traits = Traits(popular=True)

    def _pack(self):
        return [self.n, self.ks]


@dataclass(frozen=True)
class Strauss(BrdfModel):
    """Strauss' animator model; ``ks`` acts as the surface colour.

    The shaping constants ``kf = 1.12``, ``kg = 1.01`` and ``kj = 0.1`` are the
    ones published with the model (IEEE CG&A, Nov. 1990).
    """

    smoothness: float = 0.75
    metalness: float = 0.5
    ks: float = 0.5
    transparency: float = 0.0

    kind = K.STRAUSS
    name = "strauss"
    display_name = "Strauss"
    traits = Traits(popular=True)

    def _validate(self):
        if not 0.0 <= self.smoothness < 1.0:
            raise DomainError("strauss smoothness must lie in [0, 1)")

    def _pack(self):
        return [self.smoothness, self.metalness, self.ks, self.transparency]


def rational_lobe_integral(n: float) -> float:
    """``int_0^1 t^2 / (n - (n-1) t) dt``: cosine-weighted integral of Schlick's lobe."""
    if n == 1.0:
        return 1.0 / 3.0
    a, b = n, n - 1.0
    return (a * a * math.log(a / (a - b)) - a * b - 0.5 * b * b) / b**3


@dataclass(frozen=True)
class SchlickLewis(BrdfModel):
    """Schlick's rational ``t / (n - n t + t)`` lobe with an energy normalisation.

    The normalisation makes the albedo at normal incidence equal ``ks``.
    """

    n: float = 10.0
    ks: float = 0.8

    kind = K.SCHLICK_LEWIS
    name = "schlick-lewis"
    display_name = "Schlick-Lewis"
    traits = Traits(physically_plausible=True, popular=True)

    def _validate(self):
        if self.n < 1.0:
            raise DomainError("schlick-lewis exponent must be >= 1")

    @property
    def normalization(self) -> float:
        return 1.0 / (2.0 * math.pi * rational_lobe_integral(self.n))

    def _pack(self):
        return [self.n, self.ks, self.normalization]


@dataclass(frozen=True)
class Ward(BrdfModel):
    """Ward's elliptical Gaussian, exact ``tan^2`` form (not the cheap variant)."""

    roughness_x: float = 0.05
    roughness_y: float = 0.3
    ks: float = 0.05

    kind = K.WARD
    name = "ward"
    display_name = "Ward"
    traits = Traits(physically_plausible=True, fresnel=True, anisotropic=True, popular=True)

    def _validate(self):
        if self.roughness_x <= 0 or self.roughness_y <= 0:
            raise DomainError("ward roughness must be positive")

    def _pack(self):
        return [self.roughness_x, self.roughness_y, self.ks]


@dataclass(frozen=True)
class CookTorrance(BrdfModel):
    """Beckmann facets, V-cavity masking and full dielectric Fresnel.

    The complex index enters through its normal-incidence reflectance,
    converted back to a real index for the Fresnel evaluation.
    """

    m: float = 0.08
    eta: float = 1.6
    kappa: float = 0.2
    ks: float = 0.8

    kind = K.COOK_TORRANCE
    name = "cook-torrance"
    display_name = "Cook-Torrance"
    traits = Traits(physically_plausible=True, fresnel=True)

    def _validate(self):
        if self.m <= 0:
            raise DomainError("cook-torrance roughness must be positive")
        FresnelParams(self.eta, self.kappa)

    def _pack(self):
        return [self.m, FresnelParams(self.eta, self.kappa).effective_eta, self.ks]


@dataclass(frozen=True)
class PoulinFournier(BrdfModel):
    """Reflection off parallel cylinders (radius 1) spaced ``d`` apart over a floor at depth ``h``.

    The Phong highlight of every visible and lit cylinder element is averaged
    over the visible projected width with composite Simpson quadrature. The
    cylinder axis is averaged over ``orientations`` evenly spaced angles in
    ``[0, pi)``, which makes the default model invariant to quarter turns
    about the normal.
    """

    d: float = 2.0
    h: float = 4.0
    shininess: float = 100.0
    ks: float = 0.8
    simpson_nodes: int = 33
    orientations: int = 4

    kind = K.POULIN_FOURNIER
    name = "poulin-fournier"
    display_name = "Poulin-Fournier"
    traits = Traits()

    def _validate(self):
        if self.d < 2.0:
            raise DomainError("cylinders may not overlap: d must be >= 2")
        if self.simpson_nodes < 3 or self.simpson_nodes % 2 == 0:
            raise DomainError("simpson_nodes must be odd and >= 3")
        if self.orientations < 1:
            raise DomainError("orientations must be >= 1")

    def _pack(self):
        return [self.d, self.h, self.shininess, self.ks, float(self.simpson_nodes), float(self.orientations)]


@dataclass(frozen=True)
class HeTorrance(BrdfModel):
    """Directional-diffuse term of He, Torrance, Sillion and Greenberg (1991).

    Roughness ``sigma`` and autocorrelation length ``tau`` are ratios to the
    wavelength at ``reference_nm``; each band rescales them by
    ``reference_nm / band_nm``. The coherent mirror term carries
    ``exp(-g)`` with ``g > 100`` at the default roughness and is a delta
    lobe, so it is not part of the evaluated function.
    """

    tau_over_lambda: float = 10.0
    sigma_over_lambda: float = 1.0
    eta: float = 1.6
    kappa: float = -0.2
    ks: float = 0.8
    reference_nm: float = 546.1

    kind = K.HE_TORRANCE
    name = "he-torrance"
    display_name = "He-Torrance"
    traits = Traits(physically_plausible=True, fresnel=True)

    def _validate(self):
        if self.tau_over_lambda <= 0 or self.sigma_over_lambda <= 0:
            raise DomainError("he-torrance tau and sigma must be positive")

    def band_ratios(self) -> tuple[np.ndarray, np.ndarray]:
        scale = self.reference_nm / np.asarray(WAVELENGTHS_NM)
        return self.tau_over_lambda * scale, self.sigma_over_lambda * scale

    def _pack(self):
        tau, sigma = self.band_ratios()
        # the sign of kappa only fixes a phase convention; reflectance uses |kappa|
        return [*tau, *sigma, self.eta, abs(self.kappa), self.ks]


@dataclass(frozen=True)
class Lafortune(BrdfModel):
    """Single generalised cosine lobe ``(Cx ux vx + Cy uy vy + Cz uz vz)^n``."""

    c_x: float = -1.0
    c_y: float = -1.0
    c_z: float = 0.95
    exponent: float = 20.0

    kind = K.LAFORTUNE
    name = "lafortune"
    display_name = "Lafortune"
    traits = Traits(physically_plausible=True)

    def _pack(self):
        return [self.c_x, self.c_y, self.c_z, self.exponent]


@dataclass(frozen=True)
class Ashikhmin(BrdfModel):
    """Ashikhmin-Shirley anisotropic Phong specular term with Schlick Fresnel.

    ``rs`` is the normal-incidence reflectance; it matches Ward's ``ks``.
    """

    n_u: float = 10.0
    n_v: float = 1000.0
    rs: float = 0.05

    kind = K.ASHIKHMIN
    name = "ashikhmin"
    display_name = "Ashikhmin"
    traits = Traits(physically_plausible=True, fresnel=True, anisotropic=True)

    def _validate(self):
        if self.n_u <= 0 or self.n_v <= 0:
            raise DomainError("ashikhmin exponents must be positive")

    def _pack(self):
        return [self.n_u, self.n_v, self.rs]


@dataclass(frozen=True)
class Lambertian(BrdfModel):
    """Ideal diffuse ``rho / pi``. Used as an analytic reference, not a study model."""

    rho: float = 0.2

    kind = K.LAMBERT
    name = "lambertian"
    display_name = "Lambertian"
    traits = Traits(physically_plausible=True)

    def _pack(self):
        return [self.rho]


MODEL_CLASSES: tuple[type[BrdfModel], ...] = (
    Phong,
    Strauss,
    SchlickLewis,
    Ward,
    CookTorrance,
    PoulinFournier,
    HeTorrance,
    Lafortune,
    Ashikhmin,
)
MODELS_BY_NAME = {cls.name: cls for cls in MODEL_CLASSES}
_DISPLAY_TO_CLS = {cls.display_name.lower(): cls for cls in MODEL_CLASSES}


def model_names() -> list[str]:
    return [cls.name for cls in MODEL_CLASSES]


def make_model(name: str, **params) -> BrdfModel:
    """Instantiate a model by CLI name or display name, defaults for anything omitted."""
    key = name.strip().lower()
    cls = MODELS_BY_NAME.get(key) or _DISPLAY_TO_CLS.get(key)
    if cls is None:
        raise KeyError(f"unknown BRDF {name!r}; valid kinds are: {', '.join(model_names())}")
    model = cls()
    return model.with_params(**params) if params else model


def default_models() -> list[BrdfModel]:
    return [cls() for cls in MODEL_CLASSES]


def eval_brdf(model: BrdfModel, frame: LocalFrame, incident, outgoing) -> SpectralSample:
    """Evaluate ``model`` for world-space unit directions expressed relative to ``frame``."""
    wi = frame.to_local(_as_vec(incident))
    wo = frame.to_local(_as_vec(outgoing))
    return SpectralSample.from_array(model.evaluate(wi, wo))


def score_traits(model: BrdfModel) -> int:
    return model.traits.score()
