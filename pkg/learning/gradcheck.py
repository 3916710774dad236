"""
Finite-difference verification of the recurrent classifier's gradients
"""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from config import TrainConfig
from learning.lstm import ForwardMode, LstmParams, backward, forward, init_params, mean_bce

logger = logging.getLogger(__name__)

BackwardFn = Callable[..., LstmParams]


def tiny_config(**overrides) -> TrainConfig:
    """Two layers of width 8 over length-12 trajectories"""
    base = dict(window_length=12, input_size=11, hidden_sizes=(8, 8), dropout_rate=0.0, rng_seed=0)
    base.update(overrides)
    return TrainConfig(**base)


class GradCheckResult(BaseModel):
    max_rel_error: float
    per_tensor: Dict[str, float] = Field(default_factory=dict)
    n_checked: int = 0


# entries whose gradients are both below this are compared on an absolute scale
RELATIVE_FLOOR = 1e-8


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), RELATIVE_FLOOR)
    return np.abs(analytic - numeric) / denom


def sample_masks(
    params: LstmParams,
    batch_size: int,
    window_length: int,
    dropout_rate: float,
    rng: np.random.Generator,
) -> List[np.ndarray]:
    """Frozen inverted-dropout masks, one per layer"""
    return [
        (rng.random((batch_size, window_length, h)) >= dropout_rate) / (1.0 - dropout_rate)
        for h in params.hidden_sizes
    ]


def grad_check(
    config: Optional[TrainConfig] = None,
    batch_size: int = 4,
    seed: int = 0,
    step: float = 1e-5,
    dropout_rate: Optional[float] = None,
    backward_fn: BackwardFn = backward,
) -> GradCheckResult:
    """
    Compare analytic gradients with central finite differences on a random batch

    Args:
        config: Network shape; defaults to the tiny two-layer config
        batch_size: Number of random trajectories
        seed: Seed for parameters, inputs, labels and dropout masks
        step: Finite-difference step
        dropout_rate: When positive, dropout masks are sampled once and frozen
        backward_fn: Gradient routine under test

    Returns:
        GradCheckResult with the worst relative error over every parameter entry
    """
    config = config or tiny_config()
    rate = config.dropout_rate if dropout_rate is None else dropout_rate
    rng = np.random.default_rng(seed)

    params = init_params(config, rng_seed=seed)
    # move biases off their init values so every entry is exercised
    for name, t in params.tensors.items():
        if name.endswith(".b"):
            t += rng.normal(0.0, 0.1, size=t.shape)

    codes = rng.integers(0, config.input_size, size=(batch_size, config.window_length))
    labels = rng.integers(0, 2, size=batch_size).astype(np.float64)
    masks = sample_masks(params, batch_size, config.window_length, rate, rng) if rate > 0 else None

    def loss() -> float:
        prob, _ = forward(params, codes, ForwardMode.TRAIN, masks=masks)
        return mean_bce(prob, labels)

    _, cache = forward(params, codes, ForwardMode.TRAIN, masks=masks)
    grads = backward_fn(params, cache, labels)

    result = GradCheckResult(max_rel_error=0.0)
    for name, tensor in params.tensors.items():
        analytic = grads.tensors[name]
        numeric = np.zeros_like(tensor)
        flat = tensor.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step
            plus = loss()
            flat[idx] = original - step
            minus = loss()
            flat[idx] = original
            numeric.reshape(-1)[idx] = (plus - minus) / (2.0 * step)

        err = float(np.max(relative_error(analytic, numeric)))
        result.per_tensor[name] = err
        result.max_rel_error = max(result.max_rel_error, err)
        result.n_checked += tensor.size
        logger.debug(f"Gradient check {name}: max relative error {err:.3e}")

    logger.info(
        f"Gradient check over {result.n_checked} parameters: max relative error {result.max_rel_error:.3e}"
    )
    return result
