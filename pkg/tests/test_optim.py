import math

import numpy as np
import pytest

from config import TrainConfig
from learning.lstm import LstmParams
from learning.optim import adam_step, clip_by_global_norm, init_moments
from trollscope.exceptions import InvariantViolationError


def single(value: float) -> LstmParams:
    return LstmParams(input_size=1, hidden_sizes=(1,), tensors={"x": np.array([value], dtype=np.float64)})


def scalar_adam(grads, lr, b1=0.9, b2=0.999, eps=1e-8, x=0.0):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        x -= lr * m_hat / (math.sqrt(v_hat) + eps)
    return x


def test_adam_matches_scalar_reference():
    config = TrainConfig(learning_rate=0.01)
    grads = [0.3, -1.2, 0.05, 2.0, -0.7]
    params = single(0.0)
    moments = init_moments(params)
    for t, g in enumerate(grads, start=1):
        adam_step(params, single(g), moments, t, config)
    assert params.tensors["x"][0] == pytest.approx(scalar_adam(grads, 0.01), abs=1e-12)
    assert moments.t == len(grads)


def test_first_step_moves_by_learning_rate():
    config = TrainConfig(learning_rate=0.001)
    params = single(1.0)
    adam_step(params, single(123.0), init_moments(params), 1, config)
    assert params.tensors["x"][0] == pytest.approx(1.0 - 0.001, abs=1e-9)


def test_step_index_is_one_based():
    params = single(0.0)
    with pytest.raises(InvariantViolationError):
        adam_step(params, single(1.0), init_moments(params), 0, TrainConfig())


def test_non_finite_update_is_rejected():
    params = single(0.0)
    with pytest.raises(InvariantViolationError):
        adam_step(params, single(np.nan), init_moments(params), 1, TrainConfig())


def test_clip_by_global_norm():
    grads = LstmParams(
        input_size=1,
        hidden_sizes=(1,),
        tensors={"a": np.array([3.0]), "b": np.array([4.0])},
    )
    norm = clip_by_global_norm(grads, 1.0)
    assert norm == pytest.approx(5.0)
    assert grads.global_norm() == pytest.approx(1.0)
    np.testing.assert_allclose(grads.tensors["a"], [0.6])

    small = single(0.5)
    assert clip_by_global_norm(small, 5.0) == pytest.approx(0.5)
    assert small.tensors["x"][0] == 0.5
