"""
Versioned binary model files

Layout (little-endian):
    8 bytes   magic b"TSCOPEM\\x00"
    header    format_version u16, code_table_version u16, input_size u32,
              window_length u32 (0 = unknown), n_layers u32, all_sigmoid_cell u8
    n_layers  hidden sizes, u32 each
    payload   every tensor as float64, in canonical order
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from learning.lstm import PARAMS_FORMAT_VERSION, LstmParams, expected_shapes
from trollscope.exceptions import (
    ModelDimensionError,
    ModelVersionError,
    NotAModelFileError,
    TruncatedModelError,
)
from trollscope.models import CODE_TABLE_VERSION

logger = logging.getLogger(__name__)

MAGIC = b"TSCOPEM\x00"
HEADER = struct.Struct("<HHIIIB")
HIDDEN = struct.Struct("<I")
MAX_LAYERS = 64


def dumps_params(params: LstmParams) -> bytes:
    shapes = params.expected_shapes()
    for name, shape in shapes.items():
        if params.tensors[name].shape != shape:
            raise ModelDimensionError(f"tensor {name} has shape {params.tensors[name].shape}, expected {shape}")

    parts = [
        MAGIC,
        HEADER.pack(
            PARAMS_FORMAT_VERSION,
            CODE_TABLE_VERSION,
            params.input_size,
            params.window_length,
            params.n_layers,
            int(params.all_sigmoid_cell),
        ),
    ]
    parts.extend(HIDDEN.pack(h) for h in params.hidden_sizes)
    parts.extend(np.ascontiguousarray(params.tensors[name], dtype="<f8").tobytes() for name in shapes)
    return b"".join(parts)


def loads_params(blob: bytes, source: str = None) -> LstmParams:
    """
    Decode a model file payload

    Raises:
        NotAModelFileError: Wrong magic bytes
        ModelVersionError: Unsupported format or code-table version
        TruncatedModelError: Payload shorter than its header declares
        ModelDimensionError: Impossible dimensions or trailing bytes
    """
    if len(blob) < len(MAGIC):
        if MAGIC.startswith(blob) and blob:
            raise TruncatedModelError()
        raise NotAModelFileError(source)
    if blob[: len(MAGIC)] != MAGIC:
        raise NotAModelFileError(source)

    pos = len(MAGIC)
    if len(blob) < pos + HEADER.size:
        raise TruncatedModelError()
    version, table_version, input_size, window_length, n_layers, all_sigmoid = HEADER.unpack_from(blob, pos)
    pos += HEADER.size

    if version != PARAMS_FORMAT_VERSION:
        raise ModelVersionError(version, PARAMS_FORMAT_VERSION)
    if table_version != CODE_TABLE_VERSION:
        raise ModelVersionError(table_version, CODE_TABLE_VERSION)
    if input_size < 1 or not 1 <= n_layers <= MAX_LAYERS or all_sigmoid > 1:
        raise ModelDimensionError(
            f"invalid header: input_size={input_size}, n_layers={n_layers}, all_sigmoid={all_sigmoid}"
        )

    if len(blob) < pos + n_layers * HIDDEN.size:
        raise TruncatedModelError()
    hidden_sizes = tuple(HIDDEN.unpack_from(blob, pos + i * HIDDEN.size)[0] for i in range(n_layers))
    pos += n_layers * HIDDEN.size
    if any(h < 1 for h in hidden_sizes):
        raise ModelDimensionError(f"invalid hidden sizes {hidden_sizes}")

    tensors = {}
    for name, shape in expected_shapes(input_size, hidden_sizes).items():
        nbytes = int(np.prod(shape)) * 8
        if len(blob) < pos + nbytes:
            raise TruncatedModelError()
        tensors[name] = np.frombuffer(blob, dtype="<f8", count=nbytes // 8, offset=pos).astype(np.float64).reshape(shape)
        pos += nbytes

    if pos != len(blob):
        raise ModelDimensionError(f"{len(blob) - pos} unexpected trailing bytes after the declared tensors")

    return LstmParams(
        input_size=input_size,
        hidden_sizes=hidden_sizes,
        tensors=tensors,
        all_sigmoid_cell=bool(all_sigmoid),
        format_version=version,
        window_length=window_length,
    )


def save_params(params: LstmParams, path: Union[str, Path]) -> Path:
    """Write a model file; load_params(save_params(p)) reproduces p bitwise"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps_params(params))
    logger.info(f"Saved model ({params.n_parameters()} parameters) to {path}")
    return path


def load_params(path: Union[str, Path]) -> LstmParams:
    """Read a model file written by save_params"""
    path = Path(path)
    params = loads_params(path.read_bytes(), source=str(path))
    logger.info(f"Loaded model {params.hidden_sizes} from {path}")
    return params
