"""Simulation, rate calculators and bootstrap inference for the variability of rankings."""

__version__ = "0.1.0"

from .bootstrap_infer import (
    Binomial,
    RankPredictionInterval,
    Replicates,
    TwoClass,
    bootstrap_rank_intervals,
    location_stat,
    mann_whitney,
    rank_items,
    top_set_probability,
)
from .rates import RegimeReport, classify_bounded, nu_exp, nu_pol
from .sim_engine import (
    ExperimentConfig,
    RankCorrectnessReport,
    RankRealization,
    calibrate_noise,
    prefix_correct_depth,
    required_n,
    run_rank_experiment,
    set_correct_flags,
    two_item_oracle,
)
from .tail_diagnostics import TailFit, fit_stretched_exp, hill_estimator, qq_points
from .tail_models import BoundedPower, Exponential, Normal, Pareto, StretchedExp, TailModel, quantile, sample_extreme_order_stats, sample_iid

__all__ = [
    "Binomial", "BoundedPower", "ExperimentConfig", "Exponential", "Normal", "Pareto", "RankCorrectnessReport",
    "RankPredictionInterval", "RankRealization", "RegimeReport", "Replicates", "StretchedExp", "TailFit",
    "TailModel", "TwoClass", "bootstrap_rank_intervals", "calibrate_noise", "classify_bounded", "fit_stretched_exp",
    "hill_estimator", "location_stat", "mann_whitney", "nu_exp", "nu_pol", "prefix_correct_depth", "qq_points",
    "quantile", "rank_items", "required_n", "run_rank_experiment", "sample_extreme_order_stats", "sample_iid",
    "set_correct_flags", "top_set_probability", "two_item_oracle",
]
