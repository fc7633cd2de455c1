"""Monte Carlo experiment driver built on the coupled solver and expansion engine."""
from .engine import BatchJob, run_job
from .experiments import (
    MomentEstimate,
    RateReport,
    SurvivalPoint,
    covariance_check,
    divergence_sweep,
    rate_sweep,
    run_moment_estimate,
    survival_curve,
)
from .regimes import RegimeSchedule, predicted_exponent
from .scenario import PRESETS, ConfigError, Scenario, preset

__all__ = [
    "BatchJob", "run_job", "MomentEstimate", "RateReport", "SurvivalPoint", "covariance_check",
    "divergence_sweep", "rate_sweep", "run_moment_estimate", "survival_curve", "RegimeSchedule",
    "predicted_exponent", "PRESETS", "ConfigError", "Scenario", "preset",
]
