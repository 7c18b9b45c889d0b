"""Dynamic acknowledgment: instances, offline optimum, prediction errors, online policies."""

from dap.core import (
    CostBreakdown,
    DapError,
    FeasibilityError,
    FormatError,
    Instance,
    ResourceError,
    Solution,
    combine,
    delay_saving,
    dominates,
    evaluate,
    pad_pair,
    subinstance,
)
from dap.offline import OptTable, brute_force_optimal, optimal_solution, optimal_value, opt_table
from dap.error import (
    ErrorReport,
    MixedPair,
    OnlineErrorTracker,
    WindowedErrorTracker,
    best_grid_prediction,
    comparison_metrics,
    empirical_error,
    mixed_pair,
    prediction_error,
    window_error,
)
from dap.stability import StabilityProfile, is_stable_interval, stability_profile, stabilize
from dap.policies import (
    AdaptiveBudgetPolicy,
    BlindPolicy,
    BudgetPolicy,
    Decision,
    GreedyPolicy,
    PolicyRun,
    PrimalDualPolicy,
    RobustPolicy,
    error_switch_threshold,
    run_policy,
)
from dap.harness import (
    DistributionSpec,
    ExperimentConfig,
    TrialRecord,
    adversarial_pair,
    emit_plots,
    generate_instance,
    perturb_instance,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
