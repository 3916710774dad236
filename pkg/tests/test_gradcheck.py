import numpy as np
import pytest

from learning.gradcheck import RELATIVE_FLOOR, grad_check, relative_error, tiny_config
from learning.lstm import backward

TOLERANCE = 1e-4


def test_tiny_network_gradients():
    result = grad_check(tiny_config(), batch_size=4, seed=0)
    assert result.max_rel_error < TOLERANCE
    assert result.n_checked == sum(
        size for size in (11 * 32, 8 * 32, 32, 8 * 32, 8 * 32, 32, 8, 1)
    )


def test_gradients_with_frozen_dropout_masks():
    result = grad_check(tiny_config(), batch_size=3, seed=1, dropout_rate=0.3)
    assert result.max_rel_error < TOLERANCE


def test_all_sigmoid_cell_gradients():
    result = grad_check(tiny_config(all_sigmoid_cell=True, hidden_sizes=(5,)), batch_size=2, seed=2)
    assert result.max_rel_error < TOLERANCE


def test_detects_a_wrong_gradient():
    def flipped(params, cache, labels):
        grads = backward(params, cache, labels)
        grads.tensors["lstm0.U"] *= -1.0
        return grads

    result = grad_check(tiny_config(), batch_size=2, seed=0, backward_fn=flipped)
    assert result.per_tensor["lstm0.U"] > 0.5
    assert result.per_tensor["dense.w"] < TOLERANCE


def test_relative_error_floor():
    assert RELATIVE_FLOOR == 1e-8
    errors = relative_error(np.array([1e-7, 1e-9, 0.0, 2.0]), np.array([0.0, 0.0, 0.0, 1.0]))
    np.testing.assert_allclose(errors, [1.0, 0.1, 0.0, 0.5])
