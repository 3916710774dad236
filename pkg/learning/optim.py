"""
Adam optimizer and global-norm gradient clipping over LstmParams
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from config import TrainConfig
from learning.lstm import LstmParams
from trollscope.exceptions import InvariantViolationError

logger = logging.getLogger(__name__)


@dataclass
class AdamMoments:
    """First and second moment estimates, one array per parameter tensor"""
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0


def init_moments(params: LstmParams) -> AdamMoments:
    return AdamMoments(
        m={name: np.zeros_like(p) for name, p in params.tensors.items()},
        v={name: np.zeros_like(p) for name, p in params.tensors.items()},
    )


def clip_by_global_norm(grads: LstmParams, max_norm: float) -> float:
    """
    Rescale gradients in place so their global L2 norm is at most max_norm

    Returns:
        The norm before clipping
    """
    norm = grads.global_norm()
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.tensors.values():
            g *= scale
    return norm


def adam_step(
    params: LstmParams,
    grads: LstmParams,
    moments: AdamMoments,
    t: int,
    config: TrainConfig,
) -> LstmParams:
    """
    One bias-corrected Adam update, applied in place

    Args:
        params: Parameters to update
        grads: Gradients with the same layout
        moments: Moment estimates, updated in place
        t: 1-based step index
        config: Supplies learning_rate, beta1, beta2 and epsilon

    Returns:
        The updated params
    """
    if t < 1:
        raise InvariantViolationError(f"Adam step index must be >= 1, got {t}")

    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.epsilon
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t

    for name, p in params.tensors.items():
        g = grads.tensors[name]
        m = moments.m[name]
        v = moments.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)

    moments.t = t
    if not params.is_finite():
        raise InvariantViolationError(f"non-finite parameters after Adam step {t}")
    return params
