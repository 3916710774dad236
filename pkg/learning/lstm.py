"""
Stacked LSTM trajectory classifier written directly on numpy

Forward pass, backpropagation through time and binary cross-entropy for a
stack of recurrent layers (each followed by inverted dropout) topped by a
sigmoid dense unit reading the last timestep. Everything runs in float64.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit

from config import TrainConfig
from trollscope.exceptions import (
    InvalidCodeError,
    InvariantViolationError,
    LengthMismatchError,
    MissingCacheError,
)

logger = logging.getLogger(__name__)

PARAMS_FORMAT_VERSION = 2
BCE_EPS = 1e-12


class ForwardMode(str, Enum):
    TRAIN = "train"
    INFER = "infer"


@dataclass
class LstmParams:
    """
    All learnable weights of the classifier

    Gate blocks are laid out input, forget, cell, output along the last axis
    of every `lstm{l}.W` (in x 4H), `lstm{l}.U` (H x 4H) and `lstm{l}.b` (4H).
    """
    input_size: int
    hidden_sizes: Tuple[int, ...]
    tensors: Dict[str, np.ndarray]
    all_sigmoid_cell: bool = False
    format_version: int = PARAMS_FORMAT_VERSION
    # trajectory length the model was trained on, 0 when unknown
    window_length: int = 0

    @property
    def n_layers(self) -> int:
        return len(self.hidden_sizes)

    def expected_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return expected_shapes(self.input_size, self.hidden_sizes)

    def names(self) -> List[str]:
        return list(self.expected_shapes().keys())

    def layer(self, l: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.tensors[f"lstm{l}.W"], self.tensors[f"lstm{l}.U"], self.tensors[f"lstm{l}.b"]

    def zeros_like(self) -> "LstmParams":
        return LstmParams(
            input_size=self.input_size,
            hidden_sizes=self.hidden_sizes,
            tensors={name: np.zeros_like(t) for name, t in self.tensors.items()},
            all_sigmoid_cell=self.all_sigmoid_cell,
            window_length=self.window_length,
        )

    def copy(self) -> "LstmParams":
        return LstmParams(
            input_size=self.input_size,
            hidden_sizes=self.hidden_sizes,
            tensors={name: t.copy() for name, t in self.tensors.items()},
            all_sigmoid_cell=self.all_sigmoid_cell,
            format_version=self.format_version,
            window_length=self.window_length,
        )

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(t * t)) for t in self.tensors.values())))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors.values())

    def n_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())


def expected_shapes(input_size: int, hidden_sizes: Tuple[int, ...]) -> Dict[str, Tuple[int, ...]]:
    """Canonical tensor names and shapes, in persistence order"""
    shapes: Dict[str, Tuple[int, ...]] = {}
    fan_in = input_size
    for l, hidden in enumerate(hidden_sizes):
        shapes[f"lstm{l}.W"] = (fan_in, 4 * hidden)
        shapes[f"lstm{l}.U"] = (hidden, 4 * hidden)
        shapes[f"lstm{l}.b"] = (4 * hidden,)
        fan_in = hidden
    shapes["dense.w"] = (hidden_sizes[-1],)
    shapes["dense.b"] = (1,)
    return shapes


def init_params(config: TrainConfig, rng_seed: Optional[int] = None) -> LstmParams:
    """
    Xavier-uniform weights, zero biases except forget-gate biases of 1.0

    Args:
        config: Training configuration (input size, hidden sizes, cell flavour)
        rng_seed: Seed; defaults to config.rng_seed

    Returns:
        Freshly initialised parameters, identical for identical seeds
    """
    rng = np.random.default_rng(config.rng_seed if rng_seed is None else rng_seed)
    tensors: Dict[str, np.ndarray] = {}

    for name, shape in expected_shapes(config.input_size, config.hidden_sizes).items():
        if name.endswith(".b"):
            bias = np.zeros(shape, dtype=np.float64)
            if name.startswith("lstm"):
                hidden = shape[0] // 4
                bias[hidden:2 * hidden] = 1.0
            tensors[name] = bias
            continue
        fan_in = shape[0]
        fan_out = shape[1] if len(shape) > 1 else 1
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        tensors[name] = rng.uniform(-bound, bound, size=shape)

    return LstmParams(
        input_size=config.input_size,
        hidden_sizes=tuple(config.hidden_sizes),
        tensors=tensors,
        all_sigmoid_cell=config.all_sigmoid_cell,
        window_length=config.window_length,
    )


@dataclass
class LayerCache:
    x: np.ndarray          # (B, T, D) layer input
    i: np.ndarray          # (B, T, H) gate activations
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray          # (B, T+1, H) cell states, c[:, 0] = 0
    h: np.ndarray          # (B, T+1, H) hidden states before dropout
    act_c: np.ndarray      # (B, T, H) squashed cell state
    mask: Optional[np.ndarray] = None  # (B, T, H) inverted-dropout mask


@dataclass
class ForwardCache:
    """Intermediate values of a train-mode forward pass"""
    codes: np.ndarray
    layers: List[LayerCache] = field(default_factory=list)
    top_output: Optional[np.ndarray] = None  # (B, H) dropped last-step output
    logit: Optional[np.ndarray] = None
    prob: Optional[np.ndarray] = None


def one_hot(codes: np.ndarray, size: int) -> np.ndarray:
    return np.eye(size, dtype=np.float64)[codes]


def _squash(x: np.ndarray, all_sigmoid: bool) -> np.ndarray:
    return expit(x) if all_sigmoid else np.tanh(x)


def _squash_grad(a: np.ndarray, all_sigmoid: bool) -> np.ndarray:
    # derivative expressed through the activation value a
    return a * (1.0 - a) if all_sigmoid else 1.0 - a * a


def _check_codes(codes: np.ndarray, input_size: int, window_length: Optional[int]) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.ndim == 1:
        codes = codes[np.newaxis, :]
    if codes.ndim != 2:
        raise LengthMismatchError(f"expected (batch, L) codes, got shape {codes.shape}")
    if window_length is not None and codes.shape[1] != window_length:
        raise LengthMismatchError(f"trajectory length {codes.shape[1]} != L={window_length}")
    if codes.size and (codes.min() < 0 or codes.max() >= input_size):
        bad = codes[(codes < 0) | (codes >= input_size)][0]
        raise InvalidCodeError(int(bad), upper=input_size - 1)
    return codes


def _run_layer(
    x: np.ndarray,
    W: np.ndarray,
    U: np.ndarray,
    b: np.ndarray,
    all_sigmoid: bool,
    store: bool,
) -> Tuple[np.ndarray, Optional[LayerCache]]:
    B, T, _ = x.shape
    H = U.shape[0]
    xw = x @ W + b

    h = np.zeros((B, T + 1, H))
    c = np.zeros((B, T + 1, H))
    if store:
        gi, gf, gg, go, ac = (np.empty((B, T, H)) for _ in range(5))

    for t in range(T):
        z = xw[:, t] + h[:, t] @ U
        i = expit(z[:, :H])
        f = expit(z[:, H:2 * H])
        g = _squash(z[:, 2 * H:3 * H], all_sigmoid)
        o = expit(z[:, 3 * H:])
        c[:, t + 1] = f * c[:, t] + i * g
        a = _squash(c[:, t + 1], all_sigmoid)
        h[:, t + 1] = o * a
        if store:
            gi[:, t], gf[:, t], gg[:, t], go[:, t], ac[:, t] = i, f, g, o, a

    out = h[:, 1:]
    if not store:
        return out, None
    return out, LayerCache(x=x, i=gi, f=gf, g=gg, o=go, c=c, h=h, act_c=ac)


def forward(
    params: LstmParams,
    codes: np.ndarray,
    mode: ForwardMode = ForwardMode.INFER,
    rng: Optional[np.random.Generator] = None,
    dropout_rate: float = 0.0,
    masks: Optional[List[np.ndarray]] = None,
    window_length: Optional[int] = None,
) -> Tuple[np.ndarray, Optional[ForwardCache]]:
    """
    Probability of the positive class for a batch of trajectories

    Args:
        params: Classifier parameters
        codes: (B, L) or (L,) integer symbol codes
        mode: TRAIN applies dropout and returns a cache; INFER does neither
        rng: Random stream for dropout masks in TRAIN mode
        dropout_rate: Probability of zeroing a hidden output unit
        masks: Fixed per-layer dropout masks (overrides rng sampling)
        window_length: Expected L; mismatching input raises

    Returns:
        (probabilities of shape (B,), cache or None)
    """
    codes = _check_codes(codes, params.input_size, window_length)
    train = ForwardMode(mode) is ForwardMode.TRAIN
    x = one_hot(codes, params.input_size)
    cache = ForwardCache(codes=codes) if train else None

    for l in range(params.n_layers):
        W, U, b = params.layer(l)
        out, layer_cache = _run_layer(x, W, U, b, params.all_sigmoid_cell, store=train)
        if train:
            mask = None
            if masks is not None:
                mask = masks[l]
            elif dropout_rate > 0.0:
                if rng is None:
                    raise InvariantViolationError("train-mode dropout needs a random stream")
                keep = rng.random(out.shape) >= dropout_rate
                mask = keep / (1.0 - dropout_rate)
            if mask is not None:
                out = out * mask
            layer_cache.mask = mask
            cache.layers.append(layer_cache)
        x = out

    top = x[:, -1]
    logit = top @ params.tensors["dense.w"] + params.tensors["dense.b"][0]
    prob = expit(logit)

    if train:
        cache.top_output = top
        cache.logit = logit
        cache.prob = prob
    return prob, cache


def predict_proba(
    params: LstmParams,
    codes: np.ndarray,
    batch_size: int = 512,
    window_length: Optional[int] = None,
) -> np.ndarray:
    """Inference-mode probabilities for many trajectories, in batches"""
    codes = np.asarray(codes, dtype=np.int64)
    if codes.ndim == 1:
        codes = codes[np.newaxis, :]
    if len(codes) == 0:
        return np.zeros(0, dtype=np.float64)
    chunks = [
        forward(params, codes[start:start + batch_size], ForwardMode.INFER, window_length=window_length)[0]
        for start in range(0, len(codes), batch_size)
    ]
    return np.concatenate(chunks)


def loss_bce(p, label) -> np.ndarray:
    """Binary cross-entropy with p clamped to [1e-12, 1 - 1e-12]"""
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(label, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def mean_bce(p: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(loss_bce(p, labels)))


def backward(params: LstmParams, cache: Optional[ForwardCache], labels) -> LstmParams:
    """
    Exact gradients of the batch-mean BCE loss

    Args:
        params: Parameters used by the forward pass
        cache: Cache of a TRAIN-mode forward pass
        labels: 0/1 targets, one per trajectory

    Returns:
        Gradients with the same layout as params
    """
    if cache is None or cache.prob is None:
        raise MissingCacheError()

    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    batch = len(y)
    if batch != len(cache.prob):
        raise LengthMismatchError(f"{batch} labels for a batch of {len(cache.prob)}")

    grads = params.zeros_like()
    all_sigmoid = params.all_sigmoid_cell
    dlogit = (cache.prob - y) / batch

    grads.tensors["dense.w"][:] = cache.top_output.T @ dlogit
    grads.tensors["dense.b"][0] = dlogit.sum()

    top = cache.layers[-1]
    d_out = np.zeros_like(top.act_c)
    d_out[:, -1] = np.outer(dlogit, params.tensors["dense.w"])

    for l in reversed(range(params.n_layers)):
        lc = cache.layers[l]
        W, U, _ = params.layer(l)
        H = U.shape[0]
        B, T, D = lc.x.shape

        d_h_seq = d_out * lc.mask if lc.mask is not None else d_out
        dZ = np.empty((B, T, 4 * H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))

        for t in reversed(range(T)):
            i, f, g, o, a = lc.i[:, t], lc.f[:, t], lc.g[:, t], lc.o[:, t], lc.act_c[:, t]
            dh = d_h_seq[:, t] + dh_next
            dc = dc_next + dh * o * _squash_grad(a, all_sigmoid)
            dZ[:, t, :H] = dc * g * i * (1.0 - i)
            dZ[:, t, H:2 * H] = dc * lc.c[:, t] * f * (1.0 - f)
            dZ[:, t, 2 * H:3 * H] = dc * i * _squash_grad(g, all_sigmoid)
            dZ[:, t, 3 * H:] = dh * a * o * (1.0 - o)
            dc_next = dc * f
            dh_next = dZ[:, t] @ U.T

        flat_dz = dZ.reshape(B * T, 4 * H)
        grads.tensors[f"lstm{l}.W"][:] = lc.x.reshape(B * T, D).T @ flat_dz
        grads.tensors[f"lstm{l}.U"][:] = lc.h[:, :-1].reshape(B * T, H).T @ flat_dz
        grads.tensors[f"lstm{l}.b"][:] = flat_dz.sum(axis=0)

        if l > 0:
            d_out = dZ @ W.T

    return grads
