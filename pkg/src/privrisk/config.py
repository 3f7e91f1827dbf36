"""Experiment configuration: schema, strict validation, JSON round-trip.

Unknown fields are rejected everywhere. A typo in a privacy parameter must
fail loudly, not silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

STAT_COUNT = "count"
STAT_MEAN = "mean"


@dataclass(frozen=True)
class MetricModel:
    """Generative model for member metric values and their clip bounds."""

    mean: float = 50.0
    sd: float = 15.0
    clip_lower: float = 20.0
    clip_upper: float = 80.0

    def __post_init__(self) -> None:
        if not self.sd > 0:
            raise ConfigError(f"metric sd must be positive, got {self.sd}")
        if not self.clip_lower < self.clip_upper:
            raise ConfigError("metric clip_lower must be < clip_upper")


@dataclass(frozen=True)
class AdversaryConfig:
    """Candidate-set size, posterior floor, and level-tracking rate.

    level_learning_rate is the EWMA weight the adversary puts on each
    observed mean-release residual when recalibrating its estimate of the
    cohort level; 0 disables recalibration.
    """

    n_decoys: int = 10_000
    posterior_floor: float = 1e-12
    level_learning_rate: float = 0.2

    def __post_init__(self) -> None:
        if self.n_decoys < 1:
            raise ConfigError(f"n_decoys must be >= 1, got {self.n_decoys}")
        if not 0 < self.posterior_floor < 0.5:
            raise ConfigError("posterior_floor must be in (0, 0.5)")
        if not 0 <= self.level_learning_rate < 1:
            raise ConfigError("level_learning_rate must be in [0, 1)")


@dataclass(frozen=True)
class UtilityConfig:
    """Per-member noisy-percentile model (the simulation-side reading of
    reported rankings under DP noise, isolated here as a config choice)."""

    member_noise_fraction: float = 1.0 / 30.0  # of the clip width, per unit epsilon
    repetitions: int = 20

    def __post_init__(self) -> None:
        if not self.member_noise_fraction > 0:
            raise ConfigError("member_noise_fraction must be positive")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")


@dataclass(frozen=True)
class SimulationConfig:
    """Everything one Monte Carlo estimation needs, seed included."""

    k_min: int = 100
    k_max: int | None = None  # defaults to 10 * k_min
    epsilon: float = 0.3
    lambda_join: float = 10.0
    p_churn: float = 0.05
    known_fraction: float = 0.1
    query_correlation: float = 0.0
    horizon_days: int = 365
    n_sim: int = 10_000
    seed: int | None = None
    queries_per_day: int = 1
    q_max_per_day: int = 100
    query_mix: Mapping[str, float] = field(
        default_factory=lambda: {STAT_COUNT: 0.1, STAT_MEAN: 0.9}
    )
    metric: MetricModel = field(default_factory=MetricModel)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    utility: UtilityConfig = field(default_factory=UtilityConfig)
    enforce_tier_budget: bool = False

    def __post_init__(self) -> None:
        if self.k_min < 1:
            raise ConfigError(f"k_min must be >= 1, got {self.k_min}")
        if self.k_max is not None and self.k_max < self.k_min:
            raise ConfigError("k_max must be >= k_min")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.lambda_join < 0:
            raise ConfigError("lambda_join must be >= 0")
        if not 0 <= self.p_churn <= 1:
            raise ConfigError("p_churn must be in [0, 1]")
        if not 0 <= self.known_fraction <= 1:
            raise ConfigError("known_fraction must be in [0, 1]")
        if not 0 <= self.query_correlation < 1:
            raise ConfigError("query_correlation must be in [0, 1)")
        if self.horizon_days < 0:
            raise ConfigError("horizon_days must be >= 0")
        if self.n_sim < 1:
            raise ConfigError("n_sim must be >= 1")
        if self.queries_per_day < 0:
            raise ConfigError("queries_per_day must be >= 0")
        if self.q_max_per_day < 1:
            raise ConfigError("q_max_per_day must be >= 1")
        mix = dict(self.query_mix)
        if not mix:
            raise ConfigError("query_mix must not be empty")
        for stat, w in mix.items():
            if stat not in (STAT_COUNT, STAT_MEAN):
                raise ConfigError(f"unknown statistic {stat!r} in query_mix")
            if w < 0:
                raise ConfigError("query_mix weights must be >= 0")
        if sum(mix.values()) <= 0:
            raise ConfigError("query_mix weights must sum to > 0")

    @property
    def effective_k_max(self) -> int:
        return self.k_max if self.k_max is not None else 10 * self.k_min

    def resolved(self, seed: int | None = None) -> "SimulationConfig":
        """Copy with defaults made explicit (k_max, seed) for audit echoes."""
        use_seed = seed if seed is not None else self.seed
        if use_seed is None:
            raise ConfigError("a seed is required (config field or --seed)")
        return replace(self, k_max=self.effective_k_max, seed=int(use_seed))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["query_mix"] = dict(self.query_mix)
        return d


_SIM_FIELDS = {
    "k_min",
    "k_max",
    "epsilon",
    "lambda_join",
    "p_churn",
    "known_fraction",
    "query_correlation",
    "horizon_days",
    "n_sim",
    "seed",
    "queries_per_day",
    "q_max_per_day",
    "query_mix",
    "metric",
    "adversary",
    "utility",
    "enforce_tier_budget",
}


def _build_section(cls, raw: Mapping[str, Any], where: str):
    names = {f for f in cls.__dataclass_fields__}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown field {sorted(unknown)[0]!r} in {where}")
    return cls(**raw)


def simulation_config_from_dict(raw: Mapping[str, Any]) -> SimulationConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("simulation config must be a JSON object")
    unknown = set(raw) - _SIM_FIELDS
    if unknown:
        raise ConfigError(f"unknown field {sorted(unknown)[0]!r} in simulation config")
    kwargs: dict[str, Any] = dict(raw)
    if "metric" in kwargs:
        kwargs["metric"] = _build_section(MetricModel, kwargs["metric"], "metric")
    if "adversary" in kwargs:
        kwargs["adversary"] = _build_section(
            AdversaryConfig, kwargs["adversary"], "adversary"
        )
    if "utility" in kwargs:
        kwargs["utility"] = _build_section(UtilityConfig, kwargs["utility"], "utility")
    try:
        return SimulationConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_simulation_config(path: str | Path) -> SimulationConfig:
    return simulation_config_from_dict(_load_json(path))


@dataclass(frozen=True)
class ExperimentSpec:
    """A base configuration plus sweep and sensitivity axes."""

    base: SimulationConfig
    seed: int
    sweep_k_min: tuple[int, ...] = (50, 100, 200)
    sweep_epsilon: tuple[float, ...] = (1.0, 0.5, 0.3, 0.1)
    sens_known_fraction: tuple[float, ...] = (0.1, 0.2, 0.3, 0.5)
    sens_p_churn: tuple[float, ...] = (0.05, 0.10, 0.20, 0.30)
    sens_query_correlation: tuple[float, ...] = (0.0, 0.3, 0.5, 0.7)
    sens_horizon_days: tuple[int, ...] = (90, 180, 365)

    def __post_init__(self) -> None:
        if not self.sweep_k_min or not self.sweep_epsilon:
            raise ConfigError("sweep axes must be non-empty")


_SPEC_FIELDS = {"base", "seed", "sweep", "sensitivity"}
_SWEEP_FIELDS = {"k_min", "epsilon"}
_SENS_FIELDS = {"known_fraction", "p_churn", "query_correlation", "horizon_days"}


def experiment_spec_from_dict(raw: Mapping[str, Any]) -> ExperimentSpec:
    if not isinstance(raw, Mapping):
        raise ConfigError("experiment spec must be a JSON object")
    unknown = set(raw) - _SPEC_FIELDS
    if unknown:
        raise ConfigError(f"unknown field {sorted(unknown)[0]!r} in experiment spec")
    if "seed" not in raw:
        raise ConfigError("experiment spec requires a seed for reproducibility")
    base = simulation_config_from_dict(raw.get("base", {}))
    kwargs: dict[str, Any] = {"base": base, "seed": int(raw["seed"])}
    sweep = raw.get("sweep", {})
    unknown = set(sweep) - _SWEEP_FIELDS
    if unknown:
        raise ConfigError(f"unknown field {sorted(unknown)[0]!r} in sweep axes")
    if "k_min" in sweep:
        kwargs["sweep_k_min"] = tuple(int(k) for k in sweep["k_min"])
    if "epsilon" in sweep:
        kwargs["sweep_epsilon"] = tuple(float(e) for e in sweep["epsilon"])
    sens = raw.get("sensitivity", {})
    unknown = set(sens) - _SENS_FIELDS
    if unknown:
        raise ConfigError(f"unknown field {sorted(unknown)[0]!r} in sensitivity axes")
    if "known_fraction" in sens:
        kwargs["sens_known_fraction"] = tuple(float(v) for v in sens["known_fraction"])
    if "p_churn" in sens:
        kwargs["sens_p_churn"] = tuple(float(v) for v in sens["p_churn"])
    if "query_correlation" in sens:
        kwargs["sens_query_correlation"] = tuple(
            float(v) for v in sens["query_correlation"]
        )
    if "horizon_days" in sens:
        kwargs["sens_horizon_days"] = tuple(int(v) for v in sens["horizon_days"])
    return ExperimentSpec(**kwargs)


def load_experiment_spec(path: str | Path) -> ExperimentSpec:
    return experiment_spec_from_dict(_load_json(path))


def _load_json(path: str | Path) -> Any:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {p} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
