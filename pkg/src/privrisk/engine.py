"""Monte Carlo simulation of privacy-loss trajectories and tail-risk estimation.

Each run simulates one cohort over the horizon: daily membership turnover,
minimum-size gating, one or more noisy statistic releases per day, and a
Bayesian membership-inference update against a fixed target individual. The
terminal log-posterior-ratio of each run feeds the P-VaR / CP-VaR estimators.

Determinism: run r draws from a generator seeded by (seed, r), so results are
bit-identical for a given configuration regardless of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .accountant import CompositionLedger, TierLimits
from .adversary import (
    STAT_COUNT,
    STAT_MEAN,
    PopulationModel,
    SequentialMembershipBelief,
    hypothesis_statistics,
    laplace_log_density,
)
from .config import SimulationConfig
from .errors import InvalidParameterError
from .mechanisms import ClipBounds, laplace_ppf
from .safeguards import QueryDescriptor
from .utility import UtilityReport, utility_report

FLAG_SUPPRESSED = 1  # cohort below k_min; synthetic baseline served, no release
FLAG_DEGENERATE = 2  # exclusion-hypothesis statistic clamped to last valid value
FLAG_BUDGET_REJECTED = 4  # tier budget exhausted; synthetic baseline served
FLAG_CACHE_HIT = 8  # identical same-day query answered from cache


@dataclass(frozen=True)
class LossTrajectory:
    """Privacy-loss time series for one simulation run."""

    run: int
    losses: np.ndarray
    cohort_sizes: np.ndarray
    day_flags: np.ndarray

    @property
    def terminal(self) -> float:
        return float(self.losses[-1]) if self.losses.size else 0.0

    @property
    def degenerate(self) -> bool:
        return bool(np.any(self.day_flags & FLAG_DEGENERATE))


def p_var(losses: Sequence[float], alpha: float) -> float:
    """Empirical alpha-quantile: the 1-based order statistic at ceil(alpha*n).

    The small subtraction guards against float noise pushing ceil() past an
    exact integer boundary.
    """
    x = np.asarray(losses, dtype=np.float64)
    if x.size == 0:
        raise InvalidParameterError("losses must be non-empty")
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"alpha must be in (0, 1), got {alpha}")
    k = int(math.ceil(alpha * x.size - 1e-9))
    k = min(max(k, 1), x.size)
    return float(np.sort(x)[k - 1])


def cp_var_details(losses: Sequence[float], alpha: float) -> tuple[float, bool]:
    """Tail mean above P-VaR and whether the tail was empty (degenerate)."""
    x = np.asarray(losses, dtype=np.float64)
    threshold = p_var(x, alpha)
    tail = x[x > threshold]
    if tail.size == 0:
        return threshold, True
    return float(tail.mean()), False


def cp_var(losses: Sequence[float], alpha: float) -> float:
    """Mean loss strictly above the P-VaR value; P-VaR itself if no losses exceed it."""
    return cp_var_details(losses, alpha)[0]


def generate_query(
    t: int,
    previous: QueryDescriptor | None,
    rho: float,
    rng: np.random.Generator,
    mix: dict[str, float] | None = None,
) -> QueryDescriptor:
    """Next query: with probability rho repeat yesterday's, else sample the mix."""
    if not 0 <= rho < 1:
        raise InvalidParameterError(f"rho must be in [0, 1), got {rho}")
    if previous is not None and rho > 0 and rng.random() < rho:
        return previous
    mix = mix or {STAT_COUNT: 0.1, STAT_MEAN: 0.9}
    items = sorted(mix.items())
    total = sum(w for _, w in items)
    u = rng.random() * total
    acc = 0.0
    for stat, w in items:
        acc += w
        if u < acc:
            return QueryDescriptor(statistic=stat)
    return QueryDescriptor(statistic=items[-1][0])


def _simulate_run(config: SimulationConfig, seed: int, run: int) -> LossTrajectory:
    rng = np.random.default_rng(np.random.SeedSequence([seed, run]))
    t_days = config.horizon_days
    losses = np.zeros(t_days, dtype=np.float64)
    sizes = np.zeros(t_days, dtype=np.int64)
    flags = np.zeros(t_days, dtype=np.uint8)
    if t_days == 0:
        return LossTrajectory(run, losses, sizes, flags)

    metric = config.metric
    bounds = ClipBounds(metric.clip_lower, metric.clip_upper)
    population = PopulationModel(mean=metric.mean, sd=metric.sd, clip=bounds)
    width = bounds.width
    epsilon = config.epsilon

    n0 = int(rng.integers(config.k_min, config.effective_k_max + 1))
    target_value = float(
        np.clip(rng.normal(metric.mean, metric.sd), bounds.lower, bounds.upper)
    )
    others = np.clip(
        rng.normal(metric.mean, metric.sd, n0 - 1), bounds.lower, bounds.upper
    )
    # Background knowledge: a uniform subset of the non-target members, known
    # with certainty and tracked over time, so the adversary sees exactly when
    # a known member leaves the cohort.
    n_known = min(int(config.known_fraction * n0), n0 - 1)
    if n_known > 0:
        perm = rng.permutation(n0 - 1)
        known = others[perm[:n_known]].copy()
        unknown = others[perm[n_known:]].copy()
    else:
        known = np.empty(0, dtype=np.float64)
        unknown = others.copy()

    prior = 1.0 / (1.0 + config.adversary.n_decoys)
    belief = SequentialMembershipBelief(prior, floor=config.adversary.posterior_floor)

    ledger: CompositionLedger | None = None
    if config.enforce_tier_budget:
        ledger = CompositionLedger(TierLimits())

    queries_per_day = min(config.queries_per_day, config.q_max_per_day)
    rho = config.query_correlation
    mix = dict(config.query_mix)
    previous: QueryDescriptor | None = None
    last_mu_out = float(np.clip(metric.mean, bounds.lower, bounds.upper))
    p_churn = config.p_churn
    lam = config.lambda_join
    loss = 0.0
    # EWMA correction the adversary applies to both mean-hypothesis centers,
    # learned from the residuals of releases it has already seen. A common
    # shift of both centers leaves the hypothesis separation unchanged.
    level_rate = config.adversary.level_learning_rate
    level_correction = 0.0
    # The adversary conditions on the most recent snapshot: yesterday's size
    # and its live-tracked known members. Today's unobserved turnover makes
    # its size estimate noisy; the noise grows with cohort size and shrinks
    # with background knowledge.
    prev_n = n0
    prev_known_count = int(known.size)

    for day in range(t_days):
        # Membership turnover; the target is the tracked individual and stays.
        if p_churn > 0:
            if known.size:
                known = known[rng.random(known.size) >= p_churn]
            if unknown.size:
                unknown = unknown[rng.random(unknown.size) >= p_churn]
        if lam > 0:
            joins = int(rng.poisson(lam))
            if joins:
                arrivals = np.clip(
                    rng.normal(metric.mean, metric.sd, joins),
                    bounds.lower,
                    bounds.upper,
                )
                unknown = np.concatenate([unknown, arrivals])
        n = 1 + known.size + unknown.size
        sizes[day] = n

        known_departures = prev_known_count - int(known.size)
        n_hat = (
            prev_n
            - known_departures
            - p_churn * (prev_n - prev_known_count)
            + lam
        )
        prev_n = n
        prev_known_count = int(known.size)

        if n < config.k_min:
            flags[day] |= FLAG_SUPPRESSED
            losses[day] = loss
            continue

        known_sum = float(known.sum()) if known.size else 0.0
        known_count = int(known.size)
        n_hat_mean = max(n_hat, known_count + 2.0)
        day_mean: float | None = None
        served_today: set[tuple] = set()

        for _ in range(queries_per_day):
            query = generate_query(day, previous, rho, rng, mix)
            previous = query
            if query.canonical() in served_today:
                # Cached answer: same release observed again, no new evidence.
                flags[day] |= FLAG_CACHE_HIT
                continue
            served_today.add(query.canonical())

            if ledger is not None:
                charged = ledger.charge("analyst", "sim-cohort", epsilon, day)
                if not charged:
                    flags[day] |= FLAG_BUDGET_REJECTED
                    continue

            if query.statistic == STAT_COUNT:
                true_stat = float(n)
                scale = 1.0 / epsilon
                adv_scale = scale
                stat_in, stat_out = n_hat, n_hat - 1.0
            else:
                if day_mean is None:
                    total = known_sum + (unknown.sum() if unknown.size else 0.0)
                    day_mean = (total + target_value) / n
                true_stat = day_mean
                scale = width / (n * epsilon)
                # The adversary calibrates the noise scale to its own size
                # estimate, which keeps its hypothesis separation at most
                # epsilon in log-density units.
                adv_scale = width / (n_hat_mean * epsilon)
                if n < 2:
                    flags[day] |= FLAG_DEGENERATE
                    stat_in, stat_out = true_stat, last_mu_out
                else:
                    stat_in, stat_out = hypothesis_statistics(
                        STAT_MEAN,
                        n_hat_mean,
                        target_value=target_value,
                        known_sum=known_sum,
                        known_count=known_count,
                        population=population,
                    )
                    last_mu_out = stat_out
                stat_in += level_correction
                stat_out += level_correction

            release_value = true_stat + laplace_ppf(rng.random(), scale)
            belief.observe(
                laplace_log_density(release_value - stat_in, adv_scale),
                laplace_log_density(release_value - stat_out, adv_scale),
            )
            if query.statistic == STAT_MEAN and level_rate > 0:
                level_correction += level_rate * (release_value - stat_in)

        loss = belief.loss
        losses[day] = loss

    return LossTrajectory(run, losses, sizes, flags)


def _simulate_run_star(args: tuple) -> LossTrajectory:
    return _simulate_run(*args)


def run_simulation(
    config: SimulationConfig, seed: int | None = None, workers: int = 1
) -> list[LossTrajectory]:
    """All n_sim trajectories for a configuration.

    Run r depends only on (seed, r); worker count never changes the output.
    """
    resolved = config.resolved(seed)
    jobs = [(resolved, resolved.seed, r) for r in range(resolved.n_sim)]
    if workers > 1 and resolved.n_sim > 1:
        chunk = max(1, resolved.n_sim // (workers * 8))
        with Pool(processes=workers) as pool:
            return pool.map(_simulate_run_star, jobs, chunksize=chunk)
    return [_simulate_run(*job) for job in jobs]


@dataclass(frozen=True)
class RiskReport:
    """Tail-risk summary of the terminal losses of one configuration."""

    p_var_95: float
    p_var_99: float
    cp_var_95: float
    max_loss: float
    n_sim: int
    degenerate_runs: int = 0
    suppressed_day_fraction: float = 0.0
    cache_hits: int = 0
    degenerate_tail: bool = False
    config: dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    def __post_init__(self) -> None:
        if not (self.p_var_95 <= self.p_var_99 <= self.max_loss):
            raise InvalidParameterError("expected p_var_95 <= p_var_99 <= max_loss")
        if self.cp_var_95 < self.p_var_95:
            raise InvalidParameterError("expected cp_var_95 >= p_var_95")

    def to_dict(self) -> dict[str, Any]:
        return {
            "p_var_95": self.p_var_95,
            "p_var_99": self.p_var_99,
            "cp_var_95": self.cp_var_95,
            "max_loss": self.max_loss,
            "n_sim": self.n_sim,
            "degenerate_runs": self.degenerate_runs,
            "suppressed_day_fraction": self.suppressed_day_fraction,
            "cache_hits": self.cache_hits,
            "degenerate_tail": self.degenerate_tail,
            "config": self.config,
            "version": self.version,
        }


def terminal_losses(trajectories: Iterable[LossTrajectory]) -> np.ndarray:
    return np.array([t.terminal for t in trajectories], dtype=np.float64)


def risk_report(
    trajectories: Sequence[LossTrajectory], config: SimulationConfig | None = None
) -> RiskReport:
    """P-VaR / CP-VaR / max over terminal losses, plus audit counters."""
    if not trajectories:
        raise InvalidParameterError("at least one trajectory is required")
    terminals = terminal_losses(trajectories)
    cp95, degenerate_tail = cp_var_details(terminals, 0.95)
    total_days = sum(t.day_flags.size for t in trajectories)
    suppressed = sum(int(np.sum(t.day_flags & FLAG_SUPPRESSED != 0)) for t in trajectories)
    cache_hits = sum(int(np.sum(t.day_flags & FLAG_CACHE_HIT != 0)) for t in trajectories)
    return RiskReport(
        p_var_95=p_var(terminals, 0.95),
        p_var_99=p_var(terminals, 0.99),
        cp_var_95=cp95,
        max_loss=float(terminals.max()),
        n_sim=len(trajectories),
        degenerate_runs=sum(1 for t in trajectories if t.degenerate),
        suppressed_day_fraction=(suppressed / total_days) if total_days else 0.0,
        cache_hits=cache_hits,
        degenerate_tail=degenerate_tail,
        config=config.to_dict() if config is not None else {},
    )


def simulate_utility(
    config: SimulationConfig, cohort_size: int, seed: int, epsilon: float | None = None
) -> UtilityReport:
    """Utility of per-member percentile reporting under DP noise.

    Draws one fixed cohort of values, then averages the rank metrics over
    repeated noise realizations. Per-member noise scale is
    clip_width * member_noise_fraction / epsilon, the config-isolated reading
    of noisy percentile reporting.
    """
    metric = config.metric
    eps = epsilon if epsilon is not None else config.epsilon
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x75]))
    values = np.clip(
        rng.normal(metric.mean, metric.sd, cohort_size),
        metric.clip_lower,
        metric.clip_upper,
    )
    scale = (metric.clip_upper - metric.clip_lower) * config.utility.member_noise_fraction / eps
    reps = config.utility.repetitions
    reports = []
    for _ in range(reps):
        noisy = values + laplace_ppf(rng.random(cohort_size), scale)
        reports.append(utility_report(values, noisy))
    return UtilityReport(
        rank_variance=float(np.mean([r.rank_variance for r in reports])),
        spearman_rho=float(np.mean([r.spearman_rho for r in reports])),
        percentile_mae=float(np.mean([r.percentile_mae for r in reports])),
        user_error_rate=float(np.mean([r.user_error_rate for r in reports])),
    )
