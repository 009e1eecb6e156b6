"""Explain tabular anomalies with predicate-based association rules (PARs)."""

from .dataset import DataError, Dataset, Feature, Schema, load_csv, write_csv
from .detector import IsolationForest, fit_isolation_forest, tune_threshold
from .explain import Explanation, explain, render_text, to_machine
from .learner import learn
from .mining import LearningConfig, Par, RuleBook, accuracy_score
from .predicates import CategoryIn, Disjunction, NumericInterval

__version__ = "0.1.0"

__all__ = [
    "CategoryIn",
    "DataError",
    "Dataset",
    "Disjunction",
    "Explanation",
    "Feature",
    "IsolationForest",
    "LearningConfig",
    "NumericInterval",
    "Par",
    "RuleBook",
    "Schema",
    "accuracy_score",
    "explain",
    "fit_isolation_forest",
    "learn",
    "load_csv",
    "render_text",
    "to_machine",
    "tune_threshold",
    "write_csv",
]
