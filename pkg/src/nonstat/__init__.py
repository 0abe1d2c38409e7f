"""Nearest-neighbour and local-majority rules for independent, non-identically distributed data."""

from .classification import Bayes, KnnRule, PlainMajority, ZetaMajority, classify, predict_batch
from .core import Dataset, NoiseModel, Sample, Schedules, SeedSpec, derive_seed, validate_dataset
from .harness import (ExperimentConfig, MetricSeries, condition_report, convergence_sweep,
                      estimate_avg_variance, estimate_Tn)
from .neighbors import SpatialIndex, build_index, k_nearest, knn_radius, unit_ball_volume
from .oracles import GridSpec, bayes_error, chernoff_tail_check, m_star_finite, margin_mass
from .regression import ball_regress, knn_regress, rate_bound
from .scenarios import get_scenario, sample_stream

__version__ = "0.1.0"

__all__ = [
    "Bayes",
    "Dataset",
    "ExperimentConfig",
    "GridSpec",
    "KnnRule",
    "MetricSeries",
    "NoiseModel",
    "PlainMajority",
    "Sample",
    "Schedules",
    "SeedSpec",
    "SpatialIndex",
    "ZetaMajority",
    "ball_regress",
    "bayes_error",
    "build_index",
    "chernoff_tail_check",
    "classify",
    "condition_report",
    "convergence_sweep",
    "derive_seed",
    "estimate_Tn",
    "estimate_avg_variance",
    "get_scenario",
    "k_nearest",
    "knn_radius",
    "knn_regress",
    "m_star_finite",
    "margin_mass",
    "predict_batch",
    "rate_bound",
    "sample_stream",
    "unit_ball_volume",
    "validate_dataset",
]
