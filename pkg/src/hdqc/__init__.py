"""Bias-corrected quadratic classifiers for high-dimension, low-sample-size data."""

from .discriminant import FitOptions, TrainedClassifier, classify, discriminant_score, fit, fit_summaries, oracle_classifier
from .errors import ConfigError, DataError, HDQCError, NumericalError
from .estimators import sparsity_report, trsq_hat
from .evaluation import LoocvOptions, evaluate_split, loocv
from .feature_selection import select_features, theta_hat
from .simulation import ScenarioConfig, run_monte_carlo, scenario_catalog
from .summaries import ClassSummary, Dataset, fit_class_summary, read_dataset_csv
from .theory import PopulationModel, theory_quantities

__all__ = [
    "ClassSummary",
    "ConfigError",
    "DataError",
    "Dataset",
    "FitOptions",
    "HDQCError",
    "LoocvOptions",
    "NumericalError",
    "PopulationModel",
    "ScenarioConfig",
    "TrainedClassifier",
    "classify",
    "discriminant_score",
    "evaluate_split",
    "fit",
    "fit_class_summary",
    "fit_summaries",
    "loocv",
    "oracle_classifier",
    "read_dataset_csv",
    "run_monte_carlo",
    "scenario_catalog",
    "select_features",
    "sparsity_report",
    "theory_quantities",
    "theta_hat",
    "trsq_hat",
]
