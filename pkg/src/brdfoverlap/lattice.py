"""Per-pixel flux lattices produced by the sensor and compared by the overlap metric."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import DomainError


@dataclass(frozen=True)
class FluxLattice:
    """``(height, width, bands)`` array of non-negative per-pixel flux."""

    cells: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=float)
        if c.ndim == 2:
            c = c[..., None]
        if c.ndim != 3 or c.shape[0] == 0 or c.shape[1] == 0:
            raise DomainError(f"flux lattice must be a non-empty (m, n, bands) array, got {c.shape}")
        if not np.all(np.isfinite(c)) or np.any(c < 0.0):
            raise DomainError("flux lattice cells must be finite and non-negative")
        object.__setattr__(self, "cells", c)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def bands(self) -> int:
        return self.cells.shape[2]

    def band(self, k: int) -> np.ndarray:
        return self.cells[..., k]

    def scaled(self, alpha: float) -> "FluxLattice":
        return FluxLattice(self.cells * alpha, dict(self.meta))
