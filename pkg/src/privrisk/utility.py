"""Benchmark utility under DP noise: rank stability and percentile error.

Percentile ranks use the midrank convention, 100 * (#strictly_less +
0.5 * #ties) / n, which is stable under ties and invariant to any strictly
increasing transform of the values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedCorrelationError, ValidationError


def percentile_ranks(values) -> np.ndarray:
    """Midrank percentile of each element within its own sequence, in [0, 100]."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValidationError("values must be non-empty")
    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    less = np.searchsorted(sorted_v, v, side="left")
    less_eq = np.searchsorted(sorted_v, v, side="right")
    ties = less_eq - less
    return 100.0 * (less + 0.5 * ties) / v.size


def _paired(true_values, noisy_values, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(true_values, dtype=np.float64)
    x = np.asarray(noisy_values, dtype=np.float64)
    if t.shape != x.shape or t.ndim != 1:
        raise ValidationError("true and noisy values must be 1-d and equal length")
    if t.size < min_len:
        raise ValidationError(f"need at least {min_len} members, got {t.size}")
    return t, x


def rank_variance(true_values, noisy_values) -> float:
    """Variance of the per-member percentile shift rank(noisy) - rank(true)."""
    t, x = _paired(true_values, noisy_values, 2)
    shift = percentile_ranks(x) - percentile_ranks(t)
    return float(np.var(shift))


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties averaged (midranks)."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    lo = np.searchsorted(sorted_v, v, side="left")
    hi = np.searchsorted(sorted_v, v, side="right")
    return (lo + hi + 1) / 2.0


def spearman(true_values, noisy_values) -> float:
    """Spearman rank correlation with average ranks for ties."""
    t, x = _paired(true_values, noisy_values, 2)
    rt = average_ranks(t)
    rx = average_ranks(x)
    st, sx = rt.std(), rx.std()
    if st == 0 or sx == 0:
        raise UndefinedCorrelationError(
            "rank correlation undefined: zero rank variance on one side"
        )
    return float(np.mean((rt - rt.mean()) * (rx - rx.mean())) / (st * sx))


def user_error_rate(true_values, noisy_values, threshold_pp: float = 10.0) -> float:
    """Fraction of members whose percentile moved strictly more than the threshold."""
    t, x = _paired(true_values, noisy_values, 1)
    shift = np.abs(percentile_ranks(x) - percentile_ranks(t))
    return float(np.mean(shift > threshold_pp))


def percentile_mae(true_values, noisy_values) -> float:
    """Mean absolute percentile-rank shift, in percentage points."""
    t, x = _paired(true_values, noisy_values, 1)
    return float(np.mean(np.abs(percentile_ranks(x) - percentile_ranks(t))))


@dataclass(frozen=True)
class UtilityReport:
    rank_variance: float
    spearman_rho: float
    percentile_mae: float
    user_error_rate: float

    def __post_init__(self) -> None:
        if not -1.0 - 1e-9 <= self.spearman_rho <= 1.0 + 1e-9:
            raise ValidationError("spearman_rho must be in [-1, 1]")
        if not 0 <= self.user_error_rate <= 1:
            raise ValidationError("user_error_rate must be in [0, 1]")
        if self.percentile_mae < 0 or self.rank_variance < 0:
            raise ValidationError("error magnitudes must be >= 0")


def utility_report(true_values, noisy_values, threshold_pp: float = 10.0) -> UtilityReport:
    return UtilityReport(
        rank_variance=rank_variance(true_values, noisy_values),
        spearman_rho=spearman(true_values, noisy_values),
        percentile_mae=percentile_mae(true_values, noisy_values),
        user_error_rate=user_error_rate(true_values, noisy_values, threshold_pp),
    )
