"""privrisk: privacy-risk engineering for cohort analytics.

DP noise mechanisms, budget composition and three-tier accounting, cohort
dynamics, a Bayesian membership-inference adversary, Monte Carlo estimation
of Privacy Loss at Risk (P-VaR), utility metrics, synthetic baselines, and
deterministic safeguards.
"""

__version__ = "0.1.0"

from .accountant import (
    ChargeResult,
    CompositionLedger,
    GaussianLossApprox,
    TierLimits,
    advanced_compose,
    basic_compose,
    gaussian_loss_approx,
    import_ndjson,
    parallel_compose,
    renyi_compose,
)
from .adversary import (
    AdversaryBelief,
    BackgroundKnowledge,
    Hypothesis,
    PopulationModel,
    PrivacyLoss,
    belief_update,
    init_knowledge,
    observation_likelihood,
    privacy_loss,
)
from .baseline import (
    NormEntry,
    NormTable,
    SyntheticBaseline,
    adjust_baseline,
    emit_with_uncertainty,
    nearest_cohort,
)
from .cohort import (
    CohortKey,
    CohortState,
    Taxonomy,
    assign_cohorts,
    attribute_entropy,
    gate_release,
    step_dynamics,
    suppress_rare_attributes,
)
from .config import ExperimentSpec, MetricModel, SimulationConfig
from .engine import (
    LossTrajectory,
    RiskReport,
    cp_var,
    generate_query,
    p_var,
    risk_report,
    run_simulation,
)
from .mechanisms import (
    ClipBounds,
    NoisyRelease,
    Sensitivity,
    SensitivityKind,
    clip,
    clipped_mean_sensitivity,
    laplace_mechanism,
    sample_laplace,
)
from .safeguards import QueryDescriptor, RateLimitState, ResultCache
from .sketch import QuantileSketch
from .utility import (
    UtilityReport,
    percentile_mae,
    rank_variance,
    spearman,
    user_error_rate,
)
