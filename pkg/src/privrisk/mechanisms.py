"""Differential-privacy noise primitives, value clipping, and sensitivity bookkeeping.

The only randomized mechanism is the Laplace mechanism. Sampling goes through
an inverse-CDF transform of a single uniform draw per sample, so a seeded
generator reproduces the exact same noise stream every time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidParameterError


class SensitivityKind(str, Enum):
    COUNT = "count"
    CLIPPED_MEAN = "clipped_mean"
    CLIPPED_QUANTILE = "clipped_quantile"


@dataclass(frozen=True)
class Sensitivity:
    """Global sensitivity of a statistic, in the units of the statistic.

    Count queries always have sensitivity 1; clipped statistics derive theirs
    from the clip bounds.
    """

    value: float
    kind: SensitivityKind

    def __post_init__(self) -> None:
        if not self.value > 0:
            raise InvalidParameterError(
                f"sensitivity must be positive, got {self.value}"
            )
        if self.kind == SensitivityKind.COUNT and self.value != 1.0:
            raise InvalidParameterError("count queries have sensitivity exactly 1")


@dataclass(frozen=True)
class ClipBounds:
    """Inclusive value range used to bound per-record contribution."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise InvalidParameterError(
                f"clip bounds need lower < upper, got [{self.lower}, {self.upper}]"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class NoisyRelease:
    """A privacy-protected statistic release.

    In simulation mode the true value is retained (the adversary model needs
    the generative side); in production mode it is withheld.
    """

    value: float
    epsilon_spent: float
    mechanism: str = "laplace"
    true_value: float | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.epsilon_spent > 0:
            raise InvalidParameterError("epsilon_spent must be positive")

    @property
    def true_value_hidden(self) -> bool:
        return self.true_value is None


# Largest |u - 0.5| fed to the inverse CDF. Keeps log1p away from log(0) so a
# seeded stream can never produce an infinite noise value.
_HALF_OPEN = np.nextafter(0.5, 0.0)


def laplace_ppf(u, scale: float):
    """Inverse CDF of the zero-centered Laplace distribution.

    Args:
        u: uniform draw(s) in [0, 1); scalar or array.
        scale: Laplace scale parameter b > 0.

    Returns:
        Quantile(s) with the same shape as ``u``; ``u=0.5`` maps to exactly 0.
    """
    if not scale > 0:
        raise InvalidParameterError(f"scale must be positive, got {scale}")
    u = np.asarray(u, dtype=np.float64)
    centered = u - 0.5
    mag = np.minimum(np.abs(centered), _HALF_OPEN)
    out = -scale * np.sign(centered) * np.log1p(-2.0 * mag)
    return out if out.ndim else float(out)


def sample_laplace(scale: float, rng: np.random.Generator, size: int | None = None):
    """Draw from Laplace(0, scale) via inverse-CDF of one uniform per sample.

    Deterministic given the generator state: the same seed yields a
    bit-identical stream.
    """
    if not scale > 0:
        raise InvalidParameterError(f"scale must be positive, got {scale}")
    u = rng.random() if size is None else rng.random(size)
    return laplace_ppf(u, scale)


def laplace_mechanism(
    true_value: float,
    sensitivity: Sensitivity,
    epsilon: float,
    rng: np.random.Generator,
    retain_true_value: bool = False,
) -> NoisyRelease:
    """Release ``true_value`` with Laplace(sensitivity/epsilon) noise added.

    Args:
        true_value: the exact statistic to protect.
        sensitivity: global sensitivity of the statistic.
        epsilon: per-query privacy budget, > 0.
        rng: seeded generator; exactly one uniform is consumed.
        retain_true_value: keep the true value on the release (simulation mode).
    """
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    noise = sample_laplace(sensitivity.value / epsilon, rng)
    return NoisyRelease(
        value=true_value + noise,
        epsilon_spent=epsilon,
        mechanism="laplace",
        true_value=true_value if retain_true_value else None,
    )


def clip(values, bounds: ClipBounds) -> np.ndarray:
    """Clamp every value into [bounds.lower, bounds.upper].

    Order and length are preserved; in-range elements pass through unchanged.
    """
    return np.clip(np.asarray(values, dtype=np.float64), bounds.lower, bounds.upper)


def clipped_mean_sensitivity(bounds: ClipBounds, n: int) -> Sensitivity:
    """Sensitivity of a mean over ``n`` records clipped to ``bounds``."""
    if n < 1:
        raise InvalidParameterError(f"record count must be >= 1, got {n}")
    return Sensitivity(value=bounds.width / n, kind=SensitivityKind.CLIPPED_MEAN)


def count_sensitivity() -> Sensitivity:
    """Sensitivity of a count query (always 1)."""
    return Sensitivity(value=1.0, kind=SensitivityKind.COUNT)
