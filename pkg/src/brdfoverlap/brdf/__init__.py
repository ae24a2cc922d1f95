from .fresnel import FresnelParams, fresnel_conductor, fresnel_dielectric, fresnel_exact, fresnel_schlick
from .models import (
    MODEL_CLASSES,
    Ashikhmin,
    BrdfModel,
    CookTorrance,
    HeTorrance,
    Lafortune,
    Lambertian,
    Phong,
    PoulinFournier,
    SchlickLewis,
    Strauss,
    Traits,
    Ward,
    default_models,
    eval_brdf,
    make_model,
    model_names,
    score_traits,
)
