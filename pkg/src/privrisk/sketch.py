"""Streaming quantile sketch with bounded rank error.

Greedy compress-on-insert summary of (value, gap, uncertainty) tuples. For a
stream of n values and approximation parameter delta, any quantile query is
answered by a value whose true rank is within delta*n of the requested rank,
in space sublinear in n.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

from .errors import EmptySketchError, InvalidParameterError


@dataclass
class _Tuple:
    value: float
    g: int  # rank gap to the previous kept value
    delta: int  # rank uncertainty of this value

    __slots__ = ("value", "g", "delta")


class QuantileSketch:
    """Single-writer quantile summary; query freely once inserts stop."""

    def __init__(self, delta_sketch: float = 0.01):
        if not 0 < delta_sketch < 0.5:
            raise InvalidParameterError(
                f"delta_sketch must be in (0, 0.5), got {delta_sketch}"
            )
        self.delta_sketch = delta_sketch
        self.count = 0
        self._tuples: list[_Tuple] = []
        self._values: list[float] = []  # parallel sorted keys for bisect
        self._compress_every = max(1, int(math.ceil(1.0 / (2.0 * delta_sketch))))

    def __len__(self) -> int:
        return self.count

    @property
    def summary_size(self) -> int:
        return len(self._tuples)

    def insert(self, value: float) -> "QuantileSketch":
        """Add one value; returns self for chaining."""
        value = float(value)
        i = bisect_right(self._values, value)
        if i == 0 or i == len(self._tuples):
            tup = _Tuple(value, 1, 0)  # new minimum or maximum: exact rank
        else:
            cap = int(math.floor(2.0 * self.delta_sketch * self.count))
            tup = _Tuple(value, 1, max(0, cap - 1))
        self._tuples.insert(i, tup)
        self._values.insert(i, value)
        self.count += 1
        if self.count % self._compress_every == 0:
            self._compress()
        return self

    def query(self, q: float) -> float:
        """Value whose true rank is within delta_sketch*n of rank ceil(q*n)."""
        if not 0 <= q <= 1:
            raise InvalidParameterError(f"quantile must be in [0, 1], got {q}")
        if self.count == 0:
            raise EmptySketchError("cannot query an empty sketch")
        target = min(self.count, max(1, int(math.ceil(q * self.count - 1e-9))))
        err = self.delta_sketch * self.count
        best_value = self._tuples[-1].value
        best_score = math.inf
        r_min = 0
        for tup in self._tuples:
            r_min += tup.g
            r_max = r_min + tup.delta
            if target - err <= r_min and r_max <= target + err:
                return tup.value
            score = max(abs(target - r_min), abs(target - r_max))
            if score < best_score:
                best_score = score
                best_value = tup.value
        return best_value

    def _compress(self) -> None:
        cap = 2.0 * self.delta_sketch * self.count
        i = len(self._tuples) - 2
        while i >= 1:
            cur, nxt = self._tuples[i], self._tuples[i + 1]
            if cur.g + nxt.g + nxt.delta <= cap:
                nxt.g += cur.g
                del self._tuples[i]
                del self._values[i]
            i -= 1


def sketch_insert(sketch: QuantileSketch, value: float) -> QuantileSketch:
    return sketch.insert(value)


def sketch_query(sketch: QuantileSketch, q: float) -> float:
    return sketch.query(q)
