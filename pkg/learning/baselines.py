"""
Pointwise baseline classifiers over encoded trajectories

Logistic regression reads the flattened one-hot trajectory; k-nearest
neighbours compares integer code arrays by Hamming distance.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.special import expit

from config import KnnConfig, LogRegConfig
from learning.lstm import loss_bce, one_hot
from trollscope.exceptions import EmptyDatasetError, InvariantViolationError, ValidationError
from trollscope.models import TrajectoryDataset

logger = logging.getLogger(__name__)


def flatten_one_hot(codes: np.ndarray, alphabet_size: int) -> np.ndarray:
    """(n, L) codes -> (n, alphabet_size * L) features"""
    codes = np.asarray(codes, dtype=np.int64)
    if codes.ndim == 1:
        codes = codes[np.newaxis, :]
    return one_hot(codes, alphabet_size).reshape(len(codes), -1)


@dataclass
class LogRegParams:
    weights: np.ndarray
    bias: float
    alphabet_size: int
    window_length: int
    config: LogRegConfig


def logreg_loss_and_grad(
    weights: np.ndarray,
    bias: float,
    features: np.ndarray,
    labels: np.ndarray,
) -> Tuple[float, np.ndarray, float]:
    """Mean BCE and its gradient w.r.t. (weights, bias)"""
    prob = expit(features @ weights + bias)
    loss = float(np.mean(loss_bce(prob, labels)))
    residual = (prob - labels) / len(labels)
    return loss, features.T @ residual, float(residual.sum())


def train_logreg(dataset: TrajectoryDataset, config: LogRegConfig) -> LogRegParams:
    """
    Full-batch gradient descent on BCE, starting from zero weights

    Raises:
        EmptyDatasetError: For an empty dataset
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train logistic regression on an empty dataset")

    alphabet = dataset.input_kind.alphabet_size
    features = flatten_one_hot(dataset.codes, alphabet)
    labels = dataset.labels.astype(np.float64)
    weights = np.zeros(features.shape[1])
    bias = 0.0

    for epoch in range(config.epochs):
        loss, grad_w, grad_b = logreg_loss_and_grad(weights, bias, features, labels)
        weights -= config.learning_rate * grad_w
        bias -= config.learning_rate * grad_b
        if epoch % 50 == 0:
            logger.debug(f"logreg epoch {epoch}: loss {loss:.4f}")

    if not np.all(np.isfinite(weights)) or not np.isfinite(bias):
        raise InvariantViolationError("non-finite logistic regression weights")
    return LogRegParams(
        weights=weights,
        bias=bias,
        alphabet_size=alphabet,
        window_length=dataset.window_length,
        config=config,
    )


def predict_logreg(params: LogRegParams, codes: np.ndarray) -> np.ndarray:
    return expit(flatten_one_hot(codes, params.alphabet_size) @ params.weights + params.bias)


def hamming_distances(train_codes: np.ndarray, query: np.ndarray) -> np.ndarray:
    return np.sum(np.asarray(train_codes) != np.asarray(query)[np.newaxis, :], axis=1)


def knn_classify(
    train: TrajectoryDataset,
    query: np.ndarray,
    config: KnnConfig,
) -> Tuple[int, List[int]]:
    """
    Majority vote among the k Hamming-nearest training trajectories

    Distance ties go to the lower training index.

    Returns:
        (predicted class 0/1, labels of the k neighbours in distance order)

    Raises:
        ValidationError: If the training set has fewer than k trajectories
    """
    if len(train) < config.k:
        raise ValidationError(f"training set of {len(train)} trajectories is smaller than k={config.k}", field="k")
    query = np.asarray(query, dtype=np.int64)
    if query.shape != (train.window_length,):
        raise ValidationError(f"query length {query.shape} does not match L={train.window_length}")

    distances = hamming_distances(train.codes, query)
    nearest = np.argsort(distances, kind="stable")[: config.k]
    votes = [int(v) for v in train.labels[nearest]]
    return int(sum(votes) * 2 > config.k), votes


def _knn_chunk(train: TrajectoryDataset, queries: np.ndarray, config: KnnConfig) -> np.ndarray:
    return np.array([np.mean(knn_classify(train, q, config)[1]) for q in queries], dtype=np.float64)


def knn_predict_proba(
    train: TrajectoryDataset,
    queries: np.ndarray,
    config: KnnConfig,
    n_jobs: int = 1,
) -> np.ndarray:
    """Positive-vote fraction per query, usable as a ranking score"""
    queries = np.asarray(queries, dtype=np.int64)
    if len(queries) == 0:
        return np.zeros(0)
    n_chunks = max(1, min(n_jobs, len(queries)))
    bounds = np.linspace(0, len(queries), n_chunks + 1).astype(int)
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_knn_chunk)(train, queries[lo:hi], config) for lo, hi in zip(bounds[:-1], bounds[1:])
    )
    return np.concatenate(parts)
