"""Finite-dimensional l^r geometry: norms, duality maps, dual pairings, Bregman distances.

All vectors are plain 1-D numpy arrays.  A space is described by its norm
exponent r and the power p of the gauge t -> t^(p-1) that defines the duality
map.  Only 1 < r < inf is supported: those spaces are smooth and convex of
power type, so the duality map is single-valued and invertible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DimensionMismatchError, InvalidInputError

__all__ = [
    "SpaceDescriptor",
    "lr_norm",
    "duality_map",
    "inverse_duality_map",
    "dual_pairing",
    "bregman_distance",
]


@dataclass(frozen=True)
class SpaceDescriptor:
    """An l^r space paired with the duality-map power p.

    The conjugate exponents r* = r/(r-1) and p* = p/(p-1) are derived on
    demand and never stored, so they cannot drift out of sync.
    """

    r: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 1.0):
            raise ConfigurationError(
                f"norm exponent must satisfy 1 < r < inf (smooth, power-convex range); got r={self.r}"
            )
        if not (math.isfinite(self.p) and self.p > 1.0):
            raise ConfigurationError(f"duality power must satisfy p > 1; got p={self.p}")

    @property
    def r_conj(self) -> float:
        return self.r / (self.r - 1.0)

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def dual(self) -> "SpaceDescriptor":
        """Descriptor of the dual space, (r*, p*)."""
        return SpaceDescriptor(self.r_conj, self.p_conj)

    @classmethod
    def hilbert(cls) -> "SpaceDescriptor":
        return cls(2.0, 2.0)

    @classmethod
    def for_norm(cls, r: float) -> "SpaceDescriptor":
        """Descriptor with the natural convexity power p = max(r, 2)."""
        return cls(r, max(r, 2.0))


def _as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise InvalidInputError("vector contains non-finite entries")
    return v


def lr_norm(x, r: float) -> float:
    """(sum |x_j|^r)^(1/r).  Scaled by max|x_j| so large exponents stay stable."""
    if not (math.isfinite(r) and r > 1.0):
        raise ConfigurationError(f"lr_norm requires 1 < r < inf; got r={r}")
    v = _as_vector(x)
    if v.size == 0:
        return 0.0
    m = float(np.max(np.abs(v)))
    if m == 0.0:
        return 0.0
    return m * float(np.sum((np.abs(v) / m) ** r)) ** (1.0 / r)


def duality_map(x, desc: SpaceDescriptor) -> np.ndarray:
    """Componentwise ||x||_r^(p-r) |x_j|^(r-1) sign(x_j); maps 0 to 0.

    This is the gradient of x -> ||x||_r^p / p, the single-valued duality map
    of the space.
    """
    v = _as_vector(x)
    m = float(np.max(np.abs(v))) if v.size else 0.0
    if m == 0.0:
        return np.zeros_like(v)
    # Work on t = x / max|x| so every power stays in [0, 1]; the prefactor
    # m^(p-1) restores the scale.  Avoids 0^negative and overflow for large r*.
    t = v / m
    tn = float(np.sum(np.abs(t) ** desc.r)) ** (1.0 / desc.r)
    return (m ** (desc.p - 1.0)) * (tn ** (desc.p - desc.r)) * np.abs(t) ** (desc.r - 1.0) * np.sign(t)


def inverse_duality_map(xs, desc: SpaceDescriptor) -> np.ndarray:
    """Inverse of duality_map: the duality map of the dual space (r*, p*)."""
    return duality_map(xs, desc.dual)


def dual_pairing(xs, x) -> float:
    """Euclidean pairing <xs, x> = sum_j xs_j x_j."""
    a = _as_vector(xs)
    b = _as_vector(x)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"pairing of length {a.size} with length {b.size}")
    return float(np.dot(a, b))


def bregman_distance(z, w, desc: SpaceDescriptor) -> float:
    """Bregman distance (1/p*)||z||^p + (1/p)||w||^p - <J_p(z), w>.

    Non-negative, zero iff z == w; not symmetric and no triangle inequality.
    """
    zv = _as_vector(z)
    wv = _as_vector(w)
    if zv.shape != wv.shape:
        raise DimensionMismatchError(f"bregman_distance of length {zv.size} vs {wv.size}")
    nz = lr_norm(zv, desc.r)
    nw = lr_norm(wv, desc.r)
    return (
        nz ** desc.p / desc.p_conj
        + nw ** desc.p / desc.p
        - dual_pairing(duality_map(zv, desc), wv)
    )
