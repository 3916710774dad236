import struct

import numpy as np
import pytest

from config import TrainConfig
from learning.lstm import init_params, predict_proba
from learning.model_io import HEADER, MAGIC, dumps_params, load_params, loads_params, save_params
from trollscope.exceptions import (
    ModelDimensionError,
    ModelVersionError,
    NotAModelFileError,
    TruncatedModelError,
)


@pytest.fixture
def params():
    return init_params(TrainConfig(window_length=5, hidden_sizes=(4, 3), all_sigmoid_cell=True), rng_seed=9)


def test_save_load_is_bitwise(tmp_path, params):
    path = save_params(params, tmp_path / "nested" / "model.bin")
    loaded = load_params(path)
    assert loaded.hidden_sizes == (4, 3)
    assert loaded.all_sigmoid_cell is True
    assert loaded.window_length == 5
    for name, tensor in params.tensors.items():
        assert loaded.tensors[name].tobytes() == tensor.tobytes()
    codes = np.random.default_rng(0).integers(0, 11, size=(6, 5))
    np.testing.assert_array_equal(predict_proba(params, codes), predict_proba(loaded, codes))


def test_layout_starts_with_magic_and_header(params):
    blob = dumps_params(params)
    assert blob.startswith(MAGIC)
    version, table, input_size, window_length, n_layers, sigmoid = HEADER.unpack_from(blob, len(MAGIC))
    assert (version, table, input_size, window_length, n_layers, sigmoid) == (2, 1, 11, 5, 2, 1)
    n_floats = sum(t.size for t in params.tensors.values())
    assert len(blob) == len(MAGIC) + HEADER.size + 4 * 2 + 8 * n_floats


def test_wrong_magic(params):
    with pytest.raises(NotAModelFileError):
        loads_params(b"GARBAGE!" + dumps_params(params)[8:])


def test_truncated(params):
    blob = dumps_params(params)
    with pytest.raises(TruncatedModelError):
        loads_params(blob[:-3])
    with pytest.raises(TruncatedModelError):
        loads_params(blob[: len(MAGIC) + 2])


def test_trailing_bytes(params):
    with pytest.raises(ModelDimensionError):
        loads_params(dumps_params(params) + b"\x00")


def test_unsupported_version(params):
    blob = bytearray(dumps_params(params))
    struct.pack_into("<H", blob, len(MAGIC), 99)
    with pytest.raises(ModelVersionError):
        loads_params(bytes(blob))


def test_errors_map_to_data_exit_code(params):
    with pytest.raises(NotAModelFileError) as err:
        loads_params(b"")
    assert err.value.exit_code == 2


def test_unknown_window_length_round_trips_as_zero(params):
    params.window_length = 0
    assert loads_params(dumps_params(params)).window_length == 0
