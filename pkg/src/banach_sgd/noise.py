"""Seeded data corruption models and exact noise-level measurement.

All generators use numpy's Philox counter-based bit generator (Philox-4x64-10),
so a given (data, spec) pair always produces the same output, independent of
platform and call history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .spaces import lr_norm

__all__ = [
    "GaussianNoise",
    "ImpulseNoise",
    "SaltPepperNoise",
    "corrupt",
    "impulse_branch_low",
    "impulse_branch_high",
    "RNG_ALGORITHM",
]

RNG_ALGORITHM = "Philox-4x64-10 (numpy.random.Philox)"


@dataclass(frozen=True)
class GaussianNoise:
    """Additive i.i.d. normal(0, sigma^2) noise on every entry."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigurationError("sigma must be >= 0")


@dataclass(frozen=True)
class ImpulseNoise:
    """Random-valued impulse corruption.

    Each entry is left alone with probability 1 - pct; otherwise, with equal
    odds, it becomes (1 - xi) y or 1.4 xi + (1 - xi) y, with xi drawn fresh
    from Uniform(lo, hi) for every corrupted entry.
    """

    pct: float
    lo: float = 0.1
    hi: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pct <= 1.0:
            raise ConfigurationError("corruption probability must be in [0, 1]")
        if not self.lo < self.hi:
            raise ConfigurationError("impulse magnitude interval needs lo < hi")


@dataclass(frozen=True)
class SaltPepperNoise:
    """A fixed fraction of entries replaced by salt or pepper values.

    Entries are chosen uniformly without replacement; each picked entry is set
    to salt_value or pepper_value with equal probability.  salt_value defaults
    to max(y) and pepper_value to 0.
    """

    pct: float
    salt_value: float | None = None
    pepper_value: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pct <= 1.0:
            raise ConfigurationError("corruption fraction must be in [0, 1]")


def impulse_branch_low(y, xi):
    """Value of the damped impulse branch, (1 - xi) y."""
    return (1.0 - xi) * y


def impulse_branch_high(y, xi):
    """Value of the outlier impulse branch, 1.4 xi + (1 - xi) y."""
    return 1.4 * xi + (1.0 - xi) * y


def corrupt(y, spec, norm_exponent: float = 2.0):
    """Apply a noise model and return (noisy data, measured noise level).

    The second return value is the l^r norm (r = norm_exponent) of the
    realised perturbation, so downstream stopping rules can use the actual
    noise level rather than the nominal one.
    """
    y = np.asarray(y, dtype=float).ravel()
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    if isinstance(spec, GaussianNoise):
        noisy = y + rng.normal(0.0, spec.sigma, size=y.size) if spec.sigma > 0 else y.copy()
    elif isinstance(spec, ImpulseNoise):
        u = rng.random(y.size)
        xi = rng.uniform(spec.lo, spec.hi, size=y.size)
        noisy = y.copy()
        low = u < spec.pct / 2.0
        high = (u >= spec.pct / 2.0) & (u < spec.pct)
        noisy[low] = impulse_branch_low(y[low], xi[low])
        noisy[high] = impulse_branch_high(y[high], xi[high])
    elif isinstance(spec, SaltPepperNoise):
        noisy = y.copy()
        k = int(round(spec.pct * y.size))
        if k > 0:
            idx = rng.choice(y.size, size=k, replace=False)
            salt = spec.salt_value if spec.salt_value is not None else float(np.max(y))
            is_salt = rng.random(k) < 0.5
            noisy[idx[is_salt]] = salt
            noisy[idx[~is_salt]] = spec.pepper_value
    else:
        raise ConfigurationError(f"unknown noise model: {spec!r}")
    diff = noisy - y
    delta = lr_norm(diff, norm_exponent) if diff.any() else 0.0
    return noisy, delta
