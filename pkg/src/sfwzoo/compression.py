"""Compression operators for worker-to-server packets.

Each compressor splits into ``draw(rng)`` (the random choice) and
``apply(x, draw)`` (deterministic given the draw), so callers can either
sample or enumerate every outcome with its probability.

Wire model: a sparse packet costs 96 bits per coordinate (32-bit index plus
64-bit value); a dense vector costs 64 bits per entry and carries no indices.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError

BITS_PER_SPARSE_COORD = 96
BITS_PER_DENSE_COORD = 64


def dense_bits(dim: int) -> int:
    return BITS_PER_DENSE_COORD * int(dim)


@dataclass(frozen=True)
class Packet:
    values: np.ndarray
    n_coords: int
    dense: bool

    @property
    def bits(self) -> int:
        if self.dense:
            return dense_bits(self.values.shape[0])
        return BITS_PER_SPARSE_COORD * self.n_coords

    @staticmethod
    def full(x) -> "Packet":
        x = np.asarray(x, dtype=np.float64)
        return Packet(x, x.shape[0], True)


class Compressor:
    kind = "base"
    unbiased = True

    def __init__(self, dim: int, k: int | None = None):
        if dim < 1:
            raise ValidationError("dim must be >= 1")
        self.dim = int(dim)
        self.k = self.dim if k is None else int(k)
        if not (1 <= self.k <= self.dim):
            raise ValidationError(f"k={self.k} outside [1, {self.dim}]")

    @property
    def omega(self) -> float:
        raise ValidationError(f"{self.kind} is not an unbiased compressor")

    @property
    def delta(self) -> float:
        raise ValidationError(f"{self.kind} is not a contractive compressor")

    def draw(self, rng: np.random.Generator):
        return None

    def outcomes(self):
        """Every possible draw with its probability."""
        return [(1.0, None)]

    def apply(self, x, draw) -> Packet:
        raise NotImplementedError

    def __call__(self, x, rng: np.random.Generator | None = None) -> Packet:
        return self.apply(x, self.draw(rng))

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValidationError(f"input has shape {x.shape}, expected ({self.dim},)")
        return x

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, k={self.k})"


class Identity(Compressor):
    kind = "identity"

    def __init__(self, dim: int, k: int | None = None):
        super().__init__(dim, None)

    @property
    def omega(self) -> float:
        return 0.0

    @property
    def delta(self) -> float:
        return 1.0

    def apply(self, x, draw=None) -> Packet:
        return Packet(self._check(x).copy(), self.dim, True)


class RandK(Compressor):
    """Keep a uniform ``k``-subset of coordinates, scaled by ``dim / k``."""

    kind = "rand_k"

    @property
    def omega(self) -> float:
        return self.dim / self.k - 1.0

    def draw(self, rng):
        return np.sort(rng.choice(self.dim, size=self.k, replace=False)).astype(np.int64)

    def outcomes(self):
        combos = list(itertools.combinations(range(self.dim), self.k))
        prob = 1.0 / len(combos)
        return [(prob, np.array(c, dtype=np.int64)) for c in combos]

    def apply(self, x, draw) -> Packet:
        x = self._check(x)
        out = np.zeros(self.dim)
        out[draw] = x[draw] * (self.dim / self.k)
        return Packet(out, self.k, False)


class TopK(Compressor):
    """Keep the ``k`` largest magnitudes unscaled; ties go to the lowest index."""

    kind = "top_k"
    unbiased = False

    @property
    def delta(self) -> float:
        return self.dim / self.k

    def apply(self, x, draw=None) -> Packet:
        x = self._check(x)
        keep = np.argsort(-np.abs(x), kind="stable")[: self.k]
        out = np.zeros(self.dim)
        out[keep] = x[keep]
        return Packet(out, self.k, False)


_KINDS = {"identity": Identity, "rand_k": RandK, "randk": RandK, "top_k": TopK, "topk": TopK}


def make_compressor(kind: str, dim: int, k: int | None = None) -> Compressor:
    try:
        cls = _KINDS[str(kind).lower()]
    except KeyError:
        raise ValidationError(f"unknown compressor kind {kind!r}") from None
    return cls(dim, k)


def omega_of(comp: Compressor) -> float:
    return comp.omega


def delta_of(comp: Compressor) -> float:
    return comp.delta


def n_subsets(dim: int, k: int) -> int:
    return math.comb(dim, k)
