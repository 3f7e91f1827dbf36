"""Bayesian membership-inference adversary with bounded background knowledge.

The adversary watches noisy releases and updates a belief over candidate
hypotheses about who belongs to the cohort. For each release it scores two
statistics: the cohort with the target present versus absent. Statistics it
cannot compute exactly (values of members outside its background knowledge)
are estimated from the population model, so more background knowledge means
sharper hypothesis separation and faster belief movement.

Because the Laplace log-density is 1-Lipschitz and the hypothesis statistics
never differ by more than the declared sensitivity, every single-release
belief step moves the log-ratio by at most epsilon, no matter how poor the
adversary's estimates are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from .cohort import CohortState
from .errors import (
    DegenerateCohortError,
    InvalidParameterError,
    NumericalDegeneracyError,
)
from .mechanisms import ClipBounds, NoisyRelease

POSTERIOR_FLOOR = 1e-12

STAT_COUNT = "count"
STAT_MEAN = "mean"


class Hypothesis(str, Enum):
    TARGET_IN_COHORT = "target_in_cohort"
    TARGET_NOT_IN_COHORT = "target_not_in_cohort"


@dataclass(frozen=True)
class PopulationModel:
    """Generative model of member metric values granted to the adversary."""

    mean: float
    sd: float
    clip: ClipBounds

    def __post_init__(self) -> None:
        if not self.sd > 0:
            raise InvalidParameterError(f"population sd must be positive, got {self.sd}")


@dataclass(frozen=True)
class KnownMember:
    individual: int
    confidence: float = 1.0
    attributes: Mapping[str, object] | None = None

    def __post_init__(self) -> None:
        if not 0 < self.confidence <= 1:
            raise InvalidParameterError("confidence must be in (0, 1]")


@dataclass(frozen=True)
class BackgroundKnowledge:
    """The adversary's prior information: a set of known individuals."""

    known: tuple[KnownMember, ...]
    known_fraction: float

    def __post_init__(self) -> None:
        if not 0 <= self.known_fraction <= 1:
            raise InvalidParameterError("known_fraction must be in [0, 1]")

    @property
    def known_ids(self) -> frozenset[int]:
        return frozenset(m.individual for m in self.known)


def init_knowledge(
    cohort: CohortState,
    known_fraction: float,
    rng: np.random.Generator,
    target_index: int = 0,
) -> BackgroundKnowledge:
    """Mark floor(fraction * N) members as known with certainty.

    The target individual is never included; a known target makes the
    membership question degenerate.
    """
    if not 0 <= known_fraction <= 1:
        raise InvalidParameterError(
            f"known_fraction must be in [0, 1], got {known_fraction}"
        )
    pool = [i for i in range(cohort.size) if i != target_index]
    n_known = min(int(known_fraction * cohort.size), len(pool))
    if n_known == 0:
        return BackgroundKnowledge(known=(), known_fraction=known_fraction)
    chosen = rng.choice(len(pool), size=n_known, replace=False)
    members = tuple(KnownMember(individual=pool[int(i)]) for i in sorted(chosen))
    return BackgroundKnowledge(known=members, known_fraction=known_fraction)


def laplace_log_density(x: float, scale: float) -> float:
    """Log density of Laplace(0, scale) at x."""
    if not scale > 0:
        raise InvalidParameterError(f"scale must be positive, got {scale}")
    return -abs(x) / scale - math.log(2.0 * scale)


def hypothesis_statistics(
    statistic: str,
    n: float,
    target_value: float,
    known_sum: float,
    known_count: int,
    population: PopulationModel,
) -> tuple[float, float]:
    """The adversary's statistic estimates under target-in and target-out.

    ``n`` is the adversary's cohort-size estimate (real-valued when it is an
    expectation rather than an observed snapshot). ``known_sum``/``known_count``
    cover the non-target members whose clipped values the adversary knows
    exactly; remaining members are imputed at the clipped population mean.
    Estimates are clamped into the clip bounds, which caps the in/out
    separation at the declared mean sensitivity width/n.
    """
    if statistic == STAT_COUNT:
        return float(n), float(n - 1)
    if statistic != STAT_MEAN:
        raise InvalidParameterError(f"unknown statistic {statistic!r}")
    if n < 2:
        raise DegenerateCohortError(
            "mean under the exclusion hypothesis needs at least 2 members"
        )
    if known_count > n - 1:
        raise InvalidParameterError("known_count cannot exceed the non-target count")
    bounds = population.clip
    pop_mean = min(max(population.mean, bounds.lower), bounds.upper)
    unknown = n - 1 - known_count
    sum_out = known_sum + unknown * pop_mean
    mu_out = min(max(sum_out / (n - 1), bounds.lower), bounds.upper)
    v_t = min(max(target_value, bounds.lower), bounds.upper)
    mu_in = ((n - 1) * mu_out + v_t) / n
    return mu_in, mu_out


def observation_likelihood(
    release: NoisyRelease,
    hypothesis: Hypothesis,
    cohort: CohortState,
    knowledge: BackgroundKnowledge,
    statistic: str = STAT_COUNT,
    population: PopulationModel | None = None,
    target_index: int = 0,
) -> float:
    """Laplace density of the release under a membership hypothesis.

    For count queries the statistic is the snapshot size with or without the
    target. For means the statistic is estimated from the known members plus
    population imputation; with full knowledge the estimate is exact. Always
    strictly positive.
    """
    n = cohort.size
    if statistic == STAT_COUNT:
        scale = 1.0 / release.epsilon_spent
        stat_in, stat_out = float(n), float(n - 1)
    elif statistic == STAT_MEAN:
        if population is None:
            raise InvalidParameterError("mean likelihoods need a population model")
        if cohort.member_values is None:
            raise DegenerateCohortError(
                "simulation-mode member values are required for mean likelihoods"
            )
        values = np.clip(
            np.asarray(cohort.member_values, dtype=np.float64),
            population.clip.lower,
            population.clip.upper,
        )
        known_ids = [i for i in knowledge.known_ids if i != target_index and i < n]
        known_sum = float(values[known_ids].sum()) if known_ids else 0.0
        stat_in, stat_out = hypothesis_statistics(
            STAT_MEAN,
            n,
            target_value=float(values[target_index]),
            known_sum=known_sum,
            known_count=len(known_ids),
            population=population,
        )
        scale = population.clip.width / (n * release.epsilon_spent)
    else:
        raise InvalidParameterError(f"unknown statistic {statistic!r}")

    center = stat_in if hypothesis == Hypothesis.TARGET_IN_COHORT else stat_out
    return math.exp(laplace_log_density(release.value - center, scale))


@dataclass(frozen=True)
class AdversaryBelief:
    """Normalized belief over candidate hypotheses about cohort membership.

    Priors are fixed at construction; evidence accumulates in log space so
    repeated updates never under- or overflow.
    """

    priors: Mapping[object, float]
    log_weights: Mapping[object, float] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        for p in self.priors.values():
            if not 0 <= p <= 1:
                raise InvalidParameterError("priors must be probabilities")
        if abs(sum(self.priors.values()) - 1.0) > 1e-9:
            raise InvalidParameterError("candidate priors must sum to 1")
        if self.log_weights is None:
            lw = {
                c: (math.log(p) if p > 0 else -math.inf)
                for c, p in self.priors.items()
            }
            object.__setattr__(self, "log_weights", lw)

    @property
    def posteriors(self) -> dict[object, float]:
        weights = self.log_weights
        m = max(weights.values())
        if m == -math.inf:
            raise NumericalDegeneracyError("all candidate weights vanished")
        exp = {c: math.exp(w - m) for c, w in weights.items()}
        total = sum(exp.values())
        return {c: v / total for c, v in exp.items()}


def belief_update(
    belief: AdversaryBelief, likelihoods: Mapping[object, float]
) -> AdversaryBelief:
    """Posterior ∝ prior × product of per-observation likelihoods.

    Candidates missing from ``likelihoods`` are treated as likelihood 1
    (the observation says nothing about them).
    """
    logs = {}
    for c, like in likelihoods.items():
        if like < 0:
            raise InvalidParameterError("likelihoods must be non-negative")
        logs[c] = math.log(like) if like > 0 else -math.inf
    return belief_update_log(belief, logs)


def belief_update_log(
    belief: AdversaryBelief, log_likelihoods: Mapping[object, float]
) -> AdversaryBelief:
    """belief_update with log-likelihood inputs; preferred inside long runs."""
    new_weights = dict(belief.log_weights)
    for c, ll in log_likelihoods.items():
        if c not in new_weights:
            raise InvalidParameterError(f"unknown candidate {c!r}")
        new_weights[c] = new_weights[c] + ll
    if all(w == -math.inf for w in new_weights.values()):
        raise NumericalDegeneracyError("all candidate likelihoods are zero")
    return AdversaryBelief(priors=belief.priors, log_weights=new_weights)


@dataclass(frozen=True)
class PrivacyLoss:
    """Log-ratio of posterior to prior membership probability, in nats."""

    value: float
    individual: object
    day: int = 0


def privacy_loss(
    belief: AdversaryBelief,
    target: object,
    prior: float | None = None,
    day: int = 0,
    floor: float = POSTERIOR_FLOOR,
) -> PrivacyLoss:
    """ln(posterior / prior) for the target, with the posterior clamped to
    [floor, 1 - floor] so the loss is always finite."""
    if prior is None:
        prior = belief.priors[target]
    if not prior > 0:
        raise InvalidParameterError(f"prior must be positive, got {prior}")
    posterior = belief.posteriors[target]
    posterior = min(max(posterior, floor), 1.0 - floor)
    return PrivacyLoss(value=math.log(posterior / prior), individual=target, day=day)


class SequentialMembershipBelief:
    """Two-hypothesis belief (target in vs out) for hot simulation loops.

    Mathematically identical to an AdversaryBelief over the target plus any
    number of decoy candidates that share the exclusion hypothesis: the decoy
    mass folds into the prior. Tracks only the accumulated log-odds shift.
    """

    __slots__ = ("prior", "floor", "_logit0", "_shift")

    def __init__(self, prior: float, floor: float = POSTERIOR_FLOOR):
        if not 0 < prior < 1:
            raise InvalidParameterError(f"prior must be in (0, 1), got {prior}")
        if not 0 < floor < 0.5:
            raise InvalidParameterError(f"floor must be in (0, 0.5), got {floor}")
        self.prior = prior
        self.floor = floor
        self._logit0 = math.log(prior / (1.0 - prior))
        self._shift = 0.0

    def observe(self, log_like_in: float, log_like_out: float) -> None:
        self._shift += log_like_in - log_like_out

    @property
    def posterior(self) -> float:
        z = self._logit0 + self._shift
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)

    @property
    def loss(self) -> float:
        """ln(clamped posterior / prior); bounded by the clamp on both sides."""
        p = min(max(self.posterior, self.floor), 1.0 - self.floor)
        return math.log(p / self.prior)
