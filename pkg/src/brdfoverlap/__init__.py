"""Specular BRDF toolkit: nine reflectance models, radiometric flux measurement,
a flux-overlap metric for ranking BRDF pairings, and a small multi-object
volume renderer."""

__version__ = "0.1.0"
