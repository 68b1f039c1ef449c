"""Truncated-normal sampling by inverse CDF.

The inverse-CDF method consumes exactly one uniform variate per draw no
matter how severe the truncation, unlike rejection sampling whose consumption
is random.  Fixed consumption keeps counter-based replicate streams aligned
across scenarios, which the reproducibility guarantees depend on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InvalidNoiseSpecError
from .streams import RandomStream


@dataclass(frozen=True)
class NoiseSpec:
    """A normal distribution N(mean, variance) restricted to [lower, upper].

    With variance 0 the distribution degenerates to the point
    clamp(mean, lower, upper).
    """

    mean: float
    variance: float
    lower: float
    upper: float

    def __post_init__(self):
        for name in ("mean", "variance", "lower", "upper"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidNoiseSpecError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.variance < 0:
            raise InvalidNoiseSpecError(f"variance must be >= 0, got {self.variance!r}")
        if self.lower > self.upper:
            raise InvalidNoiseSpecError(
                f"empty truncation interval: lower={self.lower!r} > upper={self.upper!r}"
            )


def truncated_normal_transform(mean, variance, lower, upper, u):
    """Map uniforms in (0, 1) to truncated-normal variates. Vectorized.

    All arguments broadcast.  Zero-variance entries map to
    clamp(mean, lower, upper) while still consuming their uniform, so array
    and scalar call sites stay draw-aligned.
    """
    mean = np.asarray(mean, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)

    with np.errstate(divide="ignore", invalid="ignore"):
        sd = np.sqrt(variance)
        cdf_lo = ndtr((lower - mean) / sd)
        cdf_hi = ndtr((upper - mean) / sd)
        x = mean + sd * ndtri(cdf_lo + u * (cdf_hi - cdf_lo))
    degenerate = np.broadcast_to(variance == 0.0, x.shape)
    x = np.where(degenerate, np.clip(mean, lower, upper), x)
    # Guard against quantile round-off at extreme u; the support contract is hard.
    return np.clip(x, lower, upper)


def sample_truncated_normal(spec: NoiseSpec, rng: RandomStream) -> float:
    """One draw from the truncated normal described by `spec`.

    Consumes exactly one uniform from `rng` in every case, including the
    zero-variance degenerate one.
    """
    u = rng.uniform()
    return float(truncated_normal_transform(spec.mean, spec.variance, spec.lower, spec.upper, u))
