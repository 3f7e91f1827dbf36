"""Cohort taxonomy, assignment, size dynamics, entropy, and gating.

Cohorts are keyed by coarse demographics: 5-year age bins (lower-inclusive),
sex, a closed set of condition categories, and a flat region list. The
taxonomy is loaded from JSON so deployments can swap category lists without
code changes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

MAX_AGE = 120
NO_CONDITION = "none"
OTHER_BUCKET = "other"


class Sex(str, Enum):
    MALE = "male"
    FEMALE = "female"
    OTHER_OR_UNDISCLOSED = "other_or_undisclosed"


@dataclass(frozen=True, order=True)
class CohortKey:
    age_bin: str
    sex: str
    condition_category: str
    region: str

    def as_dict(self) -> dict[str, str]:
        return {
            "age_bin": self.age_bin,
            "sex": self.sex,
            "condition_category": self.condition_category,
            "region": self.region,
        }


@dataclass(frozen=True)
class Taxonomy:
    """Closed attribute lists for cohort assignment.

    condition_map sends raw condition names to coarse categories; anything in
    condition_categories is also accepted verbatim.
    """

    bin_width: int = 5
    condition_categories: tuple[str, ...] = (
        "cardiovascular",
        "metabolic",
        "respiratory",
        NO_CONDITION,
    )
    condition_map: Mapping[str, str] = field(
        default_factory=lambda: {
            "hypertension": "cardiovascular",
            "arrhythmia": "cardiovascular",
            "diabetes": "metabolic",
            "obesity": "metabolic",
            "asthma": "respiratory",
            "copd": "respiratory",
        }
    )
    regions: tuple[str, ...] = ("US", "EU", "UK", "APAC")

    @classmethod
    def from_json(cls, path: str | Path) -> "Taxonomy":
        raw = json.loads(Path(path).read_text())
        known = {"bin_width", "condition_categories", "condition_map", "regions"}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown taxonomy fields: {sorted(unknown)}")
        kwargs = {}
        if "bin_width" in raw:
            kwargs["bin_width"] = int(raw["bin_width"])
        if "condition_categories" in raw:
            kwargs["condition_categories"] = tuple(raw["condition_categories"])
        if "condition_map" in raw:
            kwargs["condition_map"] = dict(raw["condition_map"])
        if "regions" in raw:
            kwargs["regions"] = tuple(raw["regions"])
        return cls(**kwargs)


def age_bin_label(age: float, bin_width: int = 5) -> str:
    """Lower-inclusive bin label: ages [25, 30) map to "25-29"."""
    if age < 0:
        raise ValidationError(f"age must be >= 0, got {age}")
    if age > MAX_AGE:
        raise ValidationError(f"age {age} exceeds the maximum of {MAX_AGE}")
    lo = int(age // bin_width) * bin_width
    return f"{lo}-{lo + bin_width - 1}"


def assign_cohorts(
    attributes: Mapping[str, object], taxonomy: Taxonomy | None = None
) -> set[CohortKey]:
    """All cohort keys a user belongs to: one per condition category matched,
    or a single no-condition key.

    Missing sex maps to other_or_undisclosed; age outside [0, 120] is
    rejected. Deterministic in its inputs.
    """
    taxonomy = taxonomy or Taxonomy()
    age = attributes.get("age")
    if age is None:
        raise ValidationError("age attribute is required")
    bin_label = age_bin_label(float(age), taxonomy.bin_width)

    sex_raw = attributes.get("sex")
    if sex_raw is None or sex_raw == "":
        sex = Sex.OTHER_OR_UNDISCLOSED.value
    else:
        sex = Sex(str(sex_raw).lower()).value

    region = str(attributes.get("region", ""))
    if region not in taxonomy.regions:
        raise ValidationError(
            f"region {region!r} not in taxonomy regions {list(taxonomy.regions)}"
        )

    categories: set[str] = set()
    for cond in attributes.get("conditions", ()) or ():
        cond = str(cond).lower()
        if cond in taxonomy.condition_map:
            categories.add(taxonomy.condition_map[cond])
        elif cond in taxonomy.condition_categories:
            categories.add(cond)
        else:
            raise ValidationError(f"condition {cond!r} not in the taxonomy")
    if not categories:
        categories = {NO_CONDITION}

    return {
        CohortKey(age_bin=bin_label, sex=sex, condition_category=c, region=region)
        for c in sorted(categories)
    }


@dataclass(frozen=True)
class CohortState:
    """Immutable snapshot of one cohort at a day index.

    member_values are present in simulation mode only; index doubles as the
    member id within the snapshot.
    """

    key: CohortKey | None
    size: int
    attribute_distribution: Mapping[str, float] = field(default_factory=dict)
    member_values: tuple[float, ...] | None = None
    day: int = 0

    def __post_init__(self) -> None:
        if self.size < 0:
            raise ValidationError(f"cohort size must be >= 0, got {self.size}")
        if self.attribute_distribution:
            _check_distribution(list(self.attribute_distribution.values()))
        if self.member_values is not None and len(self.member_values) != self.size:
            raise ValidationError("member_values length must equal size")


def step_dynamics(
    n_t: int, lambda_join: float, p_churn: float, rng: np.random.Generator
) -> int:
    """One day of cohort turnover: N + Poisson(joins) - Binomial(N, churn).

    Never negative: the binomial departure draw cannot exceed N.
    """
    if n_t < 0:
        raise ValidationError(f"cohort size must be >= 0, got {n_t}")
    if lambda_join < 0:
        raise ValidationError(f"join rate must be >= 0, got {lambda_join}")
    if not 0 <= p_churn <= 1:
        raise ValidationError(f"churn probability must be in [0, 1], got {p_churn}")
    joins = int(rng.poisson(lambda_join)) if lambda_join > 0 else 0
    departures = int(rng.binomial(n_t, p_churn)) if n_t > 0 and p_churn > 0 else 0
    return n_t + joins - departures


def attribute_entropy(distribution: Sequence[float]) -> float:
    """Shannon entropy in nats, with 0*ln(0) = 0."""
    p = _check_distribution(distribution)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def gate_release(state: CohortState, k_min: int) -> bool:
    """True when the cohort may be released: size >= k_min (inclusive)."""
    return state.size >= k_min


def suppress_rare_attributes(state: CohortState, min_count: int = 5) -> CohortState:
    """Merge attribute values held by fewer than min_count members into "other".

    Member counts are taken as probability * size; the returned distribution
    is renormalized.
    """
    if not state.attribute_distribution:
        return state
    kept: dict[str, float] = {}
    other = 0.0
    for value, p in state.attribute_distribution.items():
        if p * state.size < min_count:
            other += p
        else:
            kept[value] = p
    if other > 0:
        kept[OTHER_BUCKET] = kept.get(OTHER_BUCKET, 0.0) + other
    total = sum(kept.values())
    normalized = {v: p / total for v, p in kept.items()}
    return replace(state, attribute_distribution=normalized)


def _check_distribution(distribution: Sequence[float]) -> np.ndarray:
    p = np.asarray(distribution, dtype=np.float64)
    if p.size == 0:
        raise ValidationError("distribution must be non-empty")
    if np.any(p < 0):
        raise ValidationError("distribution entries must be >= 0")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValidationError(f"distribution must sum to 1, got {float(p.sum())}")
    return p
