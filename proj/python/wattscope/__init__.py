"""Per-job power disaggregation for multi-tenant servers."""

from ._core import (
    Error,
    Model,
    Monitor,
    PowerCurve,
    aggregate,
    co_fit,
    cov,
    detect_periods,
    disaggregate,
    fit_power_curve,
    load_model,
    load_server_trace,
    mae,
    mean_fit,
    nmae,
    power_of,
    profile,
    reference_curve,
    run_experiment,
    scenario_names,
    synthetic_job,
    train_network,
)

__all__ = [
    "Error",
    "Model",
    "Monitor",
    "PowerCurve",
    "aggregate",
    "co_fit",
    "cov",
    "detect_periods",
    "disaggregate",
    "fit_power_curve",
    "load_model",
    "load_server_trace",
    "mae",
    "mean_fit",
    "nmae",
    "power_of",
    "profile",
    "reference_curve",
    "run_experiment",
    "scenario_names",
    "synthetic_job",
    "train_network",
]
