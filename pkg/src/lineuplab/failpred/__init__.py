"""Lineup-failure prediction: dual-cohort ensemble over rebalanced data."""

from lineuplab.failpred.ensemble import (
    BaseClassifierConfig,
    EnsembleConfig,
    EnsembleModel,
    LabeledDataset,
    Metrics,
    RebalanceSpec,
    StabilityReport,
    THRESHOLD_GRID,
    TrainedClassifier,
    binary_metrics,
    cross_validate,
    dataset_from_arrays,
    evaluate_classifier,
    optimize_threshold,
    precision_cohort_specs,
    rebalance,
    recall_cohort_specs,
    stratified_split,
    train_base,
    train_ensemble,
)
from lineuplab.failpred.model_io import load_model, save_model, save_training_report

__all__ = [
    "BaseClassifierConfig",
    "EnsembleConfig",
    "EnsembleModel",
    "LabeledDataset",
    "Metrics",
    "RebalanceSpec",
    "StabilityReport",
    "THRESHOLD_GRID",
    "TrainedClassifier",
    "binary_metrics",
    "cross_validate",
    "dataset_from_arrays",
    "evaluate_classifier",
    "load_model",
    "optimize_threshold",
    "precision_cohort_specs",
    "rebalance",
    "recall_cohort_specs",
    "save_model",
    "save_training_report",
    "stratified_split",
    "train_base",
    "train_ensemble",
]
