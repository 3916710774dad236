"""Evaluation package initialization"""

from evaluation.metrics import classification_report, empirical_cdf, roc_auc
from evaluation.score import classify_accounts, sweep_threshold, troll_score
from evaluation.cluster import cluster_report, indicator_features, kmeans, pca_project

__all__ = [
    "roc_auc",
    "classification_report",
    "empirical_cdf",
    "troll_score",
    "sweep_threshold",
    "classify_accounts",
    "indicator_features",
    "pca_project",
    "kmeans",
    "cluster_report",
]
