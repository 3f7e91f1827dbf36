"""Synthetic reference distributions for suppressed or budget-exhausted cohorts.

When a cohort is too small or out of budget, the serving path answers from a
norm table instead: it finds the nearest sufficiently-large cohort under a
taxonomy distance, applies configured demographic adjustments, and emits a
clearly-labeled synthetic baseline with widened uncertainty intervals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .cohort import CohortKey
from .errors import GlobalFallbackError, InvalidParameterError, ValidationError

DEFAULT_INTERVAL_INFLATION = 1.15
DEFAULT_INTERVAL_FRACTION = 0.1  # base half-width as a fraction of scale


@dataclass(frozen=True)
class DistanceWeights:
    """Per-attribute step costs for the taxonomy distance."""

    age_bin_step: float = 1.0
    sex: float = 2.0
    condition_category: float = 3.0
    region: float = 2.0


def _age_bin_index(label: str) -> int:
    try:
        lo, _ = label.split("-")
        return int(lo)
    except (ValueError, AttributeError) as exc:
        raise ValidationError(f"bad age bin label {label!r}") from exc


def key_distance(
    a: CohortKey, b: CohortKey, weights: DistanceWeights | None = None
) -> float:
    """Sum of weighted per-attribute steps between two cohort keys.

    Adjacent age bins count one step each; the categorical attributes
    contribute a flat mismatch cost. Zero iff the keys are identical.
    """
    w = weights or DistanceWeights()
    bin_width = 5
    steps = abs(_age_bin_index(a.age_bin) - _age_bin_index(b.age_bin)) / bin_width
    d = w.age_bin_step * steps
    if a.sex != b.sex:
        d += w.sex
    if a.condition_category != b.condition_category:
        d += w.condition_category
    if a.region != b.region:
        d += w.region
    return d


def nearest_cohort(
    target: CohortKey,
    available: Sequence[tuple[CohortKey, int]],
    k_min: int,
    weights: DistanceWeights | None = None,
) -> CohortKey:
    """The closest cohort with size >= k_min.

    Ties break toward the larger cohort, then the lexicographically smaller
    key. Raises GlobalFallbackError when nothing qualifies.
    """
    eligible = [(key, size) for key, size in available if size >= k_min]
    if not eligible:
        raise GlobalFallbackError(
            f"no cohort of size >= {k_min} available; fall back to the all-population cohort"
        )
    return min(
        eligible, key=lambda ks: (key_distance(target, ks[0], weights), -ks[1], ks[0])
    )[0]


@dataclass(frozen=True)
class NormEntry:
    """Reference distribution parameters for one cohort key."""

    cohort_key: CohortKey
    location: float
    scale: float
    quantiles: tuple[tuple[float, float], ...] = ()  # (q, value), non-decreasing
    adjustments: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise InvalidParameterError(f"scale must be positive, got {self.scale}")
        values = [v for _, v in self.quantiles]
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValidationError("quantile grid must be non-decreasing")


@dataclass(frozen=True)
class NormTable:
    """User-supplied external norms, keyed by cohort."""

    source: str
    entries: tuple[NormEntry, ...]
    provenance: str = "user-supplied norm file"

    def lookup(self, key: CohortKey) -> NormEntry:
        for entry in self.entries:
            if entry.cohort_key == key:
                return entry
        raise ValidationError(f"no norm entry for cohort {key}")

    @classmethod
    def from_json(cls, path: str | Path) -> "NormTable":
        raw = json.loads(Path(path).read_text())
        entries = []
        for rec in raw.get("entries", []):
            entries.append(
                NormEntry(
                    cohort_key=CohortKey(**rec["cohort_key"]),
                    location=float(rec["location"]),
                    scale=float(rec["scale"]),
                    quantiles=tuple(
                        (float(q), float(v)) for q, v in rec.get("quantiles", [])
                    ),
                    adjustments=rec.get("adjustments", {}),
                )
            )
        return cls(
            source=str(raw.get("source", "unknown")),
            entries=tuple(entries),
            provenance=str(raw.get("provenance", "user-supplied norm file")),
        )


@dataclass(frozen=True)
class SyntheticBaseline:
    """A labeled stand-in distribution; never a real cohort aggregate."""

    source_cohort: CohortKey
    target_cohort: CohortKey
    location: float
    scale: float
    quantiles: tuple[tuple[float, float], ...]
    intervals: tuple[tuple[float, float, float], ...]  # (q, low, high)
    adjustment_description: str
    provenance: str
    taxonomy_distance: float
    warning: bool = False
    synthetic: bool = True

    def __post_init__(self) -> None:
        if not self.synthetic:
            raise ValidationError("baselines are synthetic by definition")
        for (q, v), (q2, lo, hi) in zip(self.quantiles, self.intervals):
            if q != q2 or not lo <= v <= hi:
                raise ValidationError("interval must contain its point estimate")


def adjust_baseline(
    reference: NormEntry,
    target: CohortKey,
    source: CohortKey,
    weights: DistanceWeights | None = None,
    interval_inflation: float = DEFAULT_INTERVAL_INFLATION,
    interval_fraction: float = DEFAULT_INTERVAL_FRACTION,
    provenance: str = "user-supplied norm file",
) -> SyntheticBaseline:
    """Adapt a reference entry from ``source`` to ``target``.

    Each mismatched attribute applies its configured location shift and scale
    factor; uncertainty intervals widen multiplicatively per taxonomy step.
    A mismatch with no configured factor passes through unadjusted but sets
    the warning flag and still widens the interval.
    """
    distance = key_distance(source, target, weights)
    location = reference.location
    scale = reference.scale
    notes: list[str] = []
    warning = False

    def apply(attr: str, steps: float) -> None:
        nonlocal location, scale, warning
        factors = reference.adjustments.get(attr)
        if factors is None:
            warning = True
            notes.append(f"{attr}: no adjustment factor, passed through")
            return
        shift = factors.get("location", 0.0) * steps
        stretch = factors.get("scale", 1.0) ** steps
        location += shift
        scale *= stretch
        notes.append(f"{attr}: location {shift:+g}, scale x{stretch:g}")

    bin_steps = abs(_age_bin_index(target.age_bin) - _age_bin_index(source.age_bin)) / 5
    if bin_steps:
        apply("age_bin_step", bin_steps)
    if target.sex != source.sex:
        apply("sex", 1.0)
    if target.condition_category != source.condition_category:
        apply("condition_category", 1.0)
    if target.region != source.region:
        apply("region", 1.0)

    shift_total = location - reference.location
    stretch_total = scale / reference.scale
    quantiles = tuple(
        (q, v * stretch_total + shift_total) for q, v in reference.quantiles
    ) or ((0.25, location - 0.6745 * scale), (0.5, location), (0.75, location + 0.6745 * scale))

    widen = interval_inflation ** distance
    half = interval_fraction * scale * widen
    intervals = tuple((q, v - half, v + half) for q, v in quantiles)

    return SyntheticBaseline(
        source_cohort=source,
        target_cohort=target,
        location=location,
        scale=scale,
        quantiles=quantiles,
        intervals=intervals,
        adjustment_description="; ".join(notes) if notes else "identity adjustment",
        provenance=provenance,
        taxonomy_distance=distance,
        warning=warning,
    )


def emit_with_uncertainty(baseline: SyntheticBaseline) -> str:
    """Serialize a baseline record as JSON, synthetic flag always set."""
    record = {
        "synthetic": True,
        "source_cohort": baseline.source_cohort.as_dict(),
        "target_cohort": baseline.target_cohort.as_dict(),
        "location": baseline.location,
        "scale": baseline.scale,
        "quantiles": [[q, v] for q, v in baseline.quantiles],
        "intervals": [[q, lo, hi] for q, lo, hi in baseline.intervals],
        "adjustment": baseline.adjustment_description,
        "provenance": baseline.provenance,
        "taxonomy_distance": baseline.taxonomy_distance,
        "warning": baseline.warning,
    }
    return json.dumps(record, sort_keys=True)


def parse_baseline_record(text: str) -> SyntheticBaseline:
    """Inverse of emit_with_uncertainty."""
    rec = json.loads(text)
    return SyntheticBaseline(
        source_cohort=CohortKey(**rec["source_cohort"]),
        target_cohort=CohortKey(**rec["target_cohort"]),
        location=rec["location"],
        scale=rec["scale"],
        quantiles=tuple((q, v) for q, v in rec["quantiles"]),
        intervals=tuple((q, lo, hi) for q, lo, hi in rec["intervals"]),
        adjustment_description=rec["adjustment"],
        provenance=rec["provenance"],
        taxonomy_distance=rec["taxonomy_distance"],
        warning=rec["warning"],
        synthetic=rec["synthetic"],
    )
