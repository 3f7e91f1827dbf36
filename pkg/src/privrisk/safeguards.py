"""Deterministic first-line controls: rate limiting and result caching.

The rate limiter uses a true sliding window (a tumbling window would admit
2x bursts at boundaries). The cache guarantees one noise realization and one
budget charge per canonical query per day, which is what blocks averaging
and timing attacks on repeated identical queries.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .errors import InvalidParameterError
from .mechanisms import NoisyRelease

DEFAULT_Q_MAX = 100
DEFAULT_WINDOW = 1.0  # one day


class RateLimitState:
    """Per-user sliding-window query counter."""

    def __init__(self, q_max: int = DEFAULT_Q_MAX, window: float = DEFAULT_WINDOW):
        if q_max < 1:
            raise InvalidParameterError(f"q_max must be >= 1, got {q_max}")
        if not window > 0:
            raise InvalidParameterError(f"window must be positive, got {window}")
        self.q_max = q_max
        self.window = window
        self._events: dict[str, deque[float]] = {}
        self._lock = threading.Lock()

    def check(self, user: str, t: float) -> bool:
        """Allow iff the user has fewer than q_max queries in (t - window, t].

        An allowed query is counted immediately. Timestamps must be
        non-decreasing per user.
        """
        with self._lock:
            dq = self._events.setdefault(user, deque())
            if dq and t < dq[-1]:
                raise InvalidParameterError("timestamps must be non-decreasing")
            cutoff = t - self.window
            while dq and dq[0] <= cutoff:
                dq.popleft()
            if len(dq) >= self.q_max:
                return False
            dq.append(t)
            return True


def check_rate(state: RateLimitState, user: str, t: float) -> bool:
    return state.check(user, t)


@dataclass(frozen=True)
class QueryDescriptor:
    """What a query asks for; the canonical form keys the result cache."""

    statistic: str  # "count" or "mean"
    metric: str = "metric"
    cohort: str = ""
    params: Mapping[str, float] = field(default_factory=dict)

    def canonical(self) -> tuple:
        return (
            self.statistic,
            self.metric,
            self.cohort,
            tuple(sorted(self.params.items())),
        )


class ResultCache:
    """Day-scoped cache of noisy releases, single-flight per key.

    The compute thunk for a missing key runs exactly once; every identical
    same-day query afterwards observes the same release and no fresh noise or
    budget is spent.
    """

    def __init__(self) -> None:
        self._store: dict[tuple, NoisyRelease] = {}
        self._locks: dict[tuple, threading.Lock] = {}
        self._guard = threading.Lock()
        self.hits = 0
        self.misses = 0

    def cached_release(
        self, query: QueryDescriptor, day: int, compute: Callable[[], NoisyRelease]
    ) -> NoisyRelease:
        key = (query.canonical(), day)
        with self._guard:
            if key in self._store:
                self.hits += 1
                return self._store[key]
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            with self._guard:
                if key in self._store:
                    self.hits += 1
                    return self._store[key]
            release = compute()
            with self._guard:
                self._store[key] = release
                self.misses += 1
            return release

    def stats(self) -> dict[str, int]:
        return {"hits": self.hits, "misses": self.misses, "entries": len(self._store)}


def cached_release(
    cache: ResultCache, query: QueryDescriptor, day: int, compute: Callable[[], NoisyRelease]
) -> NoisyRelease:
    return cache.cached_release(query, day, compute)
