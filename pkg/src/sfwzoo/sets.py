"""Feasible sets exposing a linear minimization oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ValidationError

MEMBERSHIP_RTOL = 1e-9


@dataclass(frozen=True)
class L1Ball:
    """``{x : ||x||_1 <= radius}`` in ``dim`` dimensions."""

    radius: float
    dim: int

    def __post_init__(self):
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise ValidationError(f"radius must be positive, got {self.radius}")
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")

    def lmo(self, g):
        """Vertex minimising ``<g, s>``: ``-radius * sign(g_i) e_i`` at ``i = argmax |g_j|``.

        Ties go to the lowest index and ``sign(0)`` counts as +1.
        """
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (self.dim,):
            raise ValidationError(f"gradient has shape {g.shape}, expected ({self.dim},)")
        if np.isnan(g).any():
            raise ValidationError("NaN in gradient passed to lmo")
        i = self.lmo_index(g)
        s = np.zeros(self.dim)
        s[i] = -self.radius if g[i] >= 0 else self.radius
        return s

    @staticmethod
    def lmo_index(g) -> int:
        return int(np.argmax(np.abs(g)))

    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, x, rtol: float = MEMBERSHIP_RTOL) -> bool:
        return float(np.abs(x).sum()) <= self.radius * (1.0 + rtol)

    def vertices(self):
        """All ``2 * dim`` extreme points, as rows."""
        eye = np.eye(self.dim) * self.radius
        return np.vstack([eye, -eye])
