"""Privacy-loss composition and the three-tier budget ledger.

Composition regimes: basic (sum), advanced (sublinear bound for n identical
queries), parallel (max over declared-disjoint cohorts), and Renyi of a fixed
order. The ledger enforces per-query, per-cohort-day, and per-user-month
epsilon budgets over an integer day index; days are 1-day and months 30-day
tumbling windows.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InvalidParameterError, ValidationError

DAYS_PER_MONTH = 30

TIER_PER_QUERY = "per_query"
TIER_PER_COHORT_DAY = "per_cohort_day"
TIER_PER_USER_MONTH = "per_user_month"


def basic_compose(epsilons: Sequence[float]) -> float:
    """Total budget under sequential composition: the plain sum."""
    _check_positive(epsilons)
    return float(sum(epsilons))


def advanced_compose(epsilon: float, n: int, delta: float) -> float:
    """Sublinear bound for n identical epsilon-DP queries at slack delta.

    Returns eps*sqrt(2n*ln(1/delta)) + n*eps*(e^eps - 1).
    """
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if not 0 < delta < 1:
        raise InvalidParameterError(f"delta must be in (0, 1), got {delta}")
    return epsilon * math.sqrt(2 * n * math.log(1 / delta)) + n * epsilon * (
        math.exp(epsilon) - 1
    )


def parallel_compose(
    epsilons: Sequence[float], cohort_ids: Sequence[object] | None = None
) -> float:
    """Budget when queries touch disjoint cohorts: the maximum epsilon.

    Disjointness is the caller's claim; when cohort ids are supplied they are
    checked for duplicates and overlap is refused. Without the declaration,
    use sequential accounting instead.
    """
    _check_positive(epsilons)
    if cohort_ids is not None:
        if len(cohort_ids) != len(epsilons):
            raise ValidationError("cohort_ids must pair 1:1 with epsilons")
        if len(set(cohort_ids)) != len(cohort_ids):
            raise ValidationError(
                "parallel composition requires disjoint cohorts; duplicate cohort ids"
            )
    return float(max(epsilons, default=0.0))


def renyi_compose(epsilons: Sequence[float], alpha: float = 32.0) -> float:
    """Renyi-style composition: (1/alpha) * ln(sum_i e^(alpha * eps_i))."""
    if not alpha > 1:
        raise InvalidParameterError(f"alpha must be > 1, got {alpha}")
    _check_positive(epsilons)
    if len(epsilons) == 0:
        return 0.0
    # log-sum-exp with a shift; alpha*eps can overflow exp() directly.
    scaled = [alpha * e for e in epsilons]
    m = max(scaled)
    return (m + math.log(sum(math.exp(s - m) for s in scaled))) / alpha


@dataclass(frozen=True)
class GaussianLossApprox:
    """Normal approximation of accumulated loss over n epsilon-queries.

    An approximation utility only: mean n*eps, variance n*eps^2.
    """

    mean: float
    variance: float


def gaussian_loss_approx(n: int, epsilon: float) -> GaussianLossApprox:
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    return GaussianLossApprox(mean=n * epsilon, variance=n * epsilon * epsilon)


@dataclass(frozen=True)
class TierLimits:
    """Three-tier budget caps (defaults: 0.01 / 0.10 / 1.0)."""

    per_query: float = 0.01
    per_cohort_day: float = 0.10
    per_user_month: float = 1.0

    def __post_init__(self) -> None:
        for name in ("per_query", "per_cohort_day", "per_user_month"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} limit must be positive")


@dataclass(frozen=True)
class LedgerEntry:
    day: int
    user: str
    cohort: str
    epsilon: float


@dataclass(frozen=True)
class ChargeResult:
    accepted: bool
    tier: str | None = None  # violated tier when rejected

    def __bool__(self) -> bool:
        return self.accepted


class CompositionLedger:
    """Append-only record of accepted charges with O(1) tier checks.

    Single-writer: charges are serialized through one lock. Reads of committed
    sums are safe concurrently because entries are immutable once appended.
    """

    def __init__(self, tier_limits: TierLimits | None = None):
        self.tier_limits = tier_limits or TierLimits()
        self.entries: list[LedgerEntry] = []
        self._cohort_day: dict[tuple[str, int], float] = {}
        self._user_month: dict[tuple[str, int], float] = {}
        self._lock = threading.Lock()

    def charge(self, user: str, cohort: str, epsilon: float, day: int) -> ChargeResult:
        """Attempt to spend ``epsilon``; reject without mutation if any tier breaks."""
        if not epsilon > 0:
            raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
        if day < 0:
            raise InvalidParameterError(f"day index must be >= 0, got {day}")
        with self._lock:
            if epsilon > self.tier_limits.per_query:
                return ChargeResult(False, TIER_PER_QUERY)
            day_key = (cohort, day)
            if self._cohort_day.get(day_key, 0.0) + epsilon > self.tier_limits.per_cohort_day:
                return ChargeResult(False, TIER_PER_COHORT_DAY)
            month_key = (user, day // DAYS_PER_MONTH)
            if self._user_month.get(month_key, 0.0) + epsilon > self.tier_limits.per_user_month:
                return ChargeResult(False, TIER_PER_USER_MONTH)
            self.entries.append(LedgerEntry(day, user, cohort, epsilon))
            self._cohort_day[day_key] = self._cohort_day.get(day_key, 0.0) + epsilon
            self._user_month[month_key] = self._user_month.get(month_key, 0.0) + epsilon
            return ChargeResult(True)

    def cohort_day_total(self, cohort: str, day: int) -> float:
        return self._cohort_day.get((cohort, day), 0.0)

    def user_month_total(self, user: str, month: int) -> float:
        return self._user_month.get((user, month), 0.0)

    def multi_cohort_user_loss(self, user: str, t: int) -> float:
        """Conservative total loss for a user across all cohorts up to day t."""
        if t < 0:
            raise InvalidParameterError(f"day index must be >= 0, got {t}")
        return float(
            sum(e.epsilon for e in self.entries if e.user == user and e.day <= t)
        )

    def export_ndjson(self) -> str:
        """Entries as newline-delimited JSON records for audit replay."""
        lines = [
            json.dumps(
                {"day": e.day, "user": e.user, "cohort": e.cohort, "epsilon": e.epsilon},
                sort_keys=True,
            )
            for e in self.entries
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def import_ndjson(
    text: str | Iterable[str], tier_limits: TierLimits | None = None
) -> CompositionLedger:
    """Replay an NDJSON audit export through a fresh ledger.

    Raises ValidationError if any replayed charge violates a tier: an export
    that does not replay cleanly was not produced by a conforming ledger.
    """
    ledger = CompositionLedger(tier_limits)
    lines = text.splitlines() if isinstance(text, str) else text
    for i, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            result = ledger.charge(rec["user"], rec["cohort"], rec["epsilon"], rec["day"])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"bad ledger record on line {i + 1}: {exc}") from exc
        if not result:
            raise ValidationError(
                f"replayed charge on line {i + 1} violates tier {result.tier}"
            )
    return ledger


def _check_positive(epsilons: Sequence[float]) -> None:
    for e in epsilons:
        if not e > 0:
            raise InvalidParameterError(f"all epsilons must be positive, got {e}")
