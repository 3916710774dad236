"""
Trajectory formation: fixed-length windows over state-action sequences
"""

import logging
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from behavior_tools.sequence import encode_sequence
from trollscope.exceptions import UnlabeledAccountError, WindowLengthError
from trollscope.models import (
    AccountClass,
    AccountSequence,
    InputKind,
    Trajectory,
    TrajectoryDataset,
)
from utils import write_frame

logger = logging.getLogger(__name__)


def _check_window_length(window_length: int) -> None:
    if window_length < 1:
        raise WindowLengthError(window_length)


def chunk_offsets(length: int, window_length: int) -> np.ndarray:
    """Offsets of the non-overlapping windows; a trailing remainder is discarded"""
    _check_window_length(window_length)
    return np.arange(length // window_length, dtype=np.int64) * window_length


def chunk_matrix(codes: np.ndarray, window_length: int) -> np.ndarray:
    n = len(codes) // window_length
    return codes[: n * window_length].reshape(n, window_length)


def window_matrix(codes: np.ndarray, window_length: int) -> np.ndarray:
    """All stride-1 windows as a read-only (n_windows, L) view"""
    _check_window_length(window_length)
    if len(codes) < window_length:
        return np.zeros((0, window_length), dtype=np.int64)
    return sliding_window_view(codes, window_length)


def chunk_nonoverlapping(
    seq: AccountSequence,
    window_length: int,
    input_kind: InputKind = InputKind.STATE_ACTION,
) -> List[Trajectory]:
    """
    Split a sequence into floor(|seq| / L) back-to-back windows

    Args:
        seq: Account sequence
        window_length: L
        input_kind: Alphabet of the produced codes

    Returns:
        Trajectories at offsets 0, L, 2L, ...
    """
    _check_window_length(window_length)
    codes = encode_sequence(seq, input_kind)
    matrix = chunk_matrix(codes, window_length)
    return [
        Trajectory(codes=row.copy(), account_id=seq.account_id, offset=int(offset))
        for row, offset in zip(matrix, chunk_offsets(len(codes), window_length))
    ]


def sliding_windows(
    seq: AccountSequence,
    window_length: int,
    input_kind: InputKind = InputKind.STATE_ACTION,
) -> List[Trajectory]:
    """
    Every stride-1 window of a sequence; max(0, |seq| - L + 1) trajectories
    """
    codes = encode_sequence(seq, input_kind)
    matrix = window_matrix(codes, window_length)
    return [
        Trajectory(codes=np.array(row), account_id=seq.account_id, offset=offset)
        for offset, row in enumerate(matrix)
    ]


def assemble_dataset(
    sequences: Dict[str, AccountSequence],
    labels: Dict[str, AccountClass],
    window_length: int,
    input_kind: InputKind = InputKind.STATE_ACTION,
) -> TrajectoryDataset:
    """
    Build a labeled dataset of non-overlapping trajectories

    Each trajectory inherits the label of its account.

    Args:
        sequences: Account sequences keyed by account id
        labels: Account classes keyed by account id
        window_length: L
        input_kind: Alphabet of the produced codes

    Returns:
        TrajectoryDataset with per-class counts

    Raises:
        UnlabeledAccountError: If a sequence has no label
    """
    _check_window_length(window_length)

    blocks, account_ids, offsets, targets = [], [], [], []
    for account_id, seq in sequences.items():
        if account_id not in labels:
            raise UnlabeledAccountError(account_id)
        codes = encode_sequence(seq, input_kind)
        matrix = chunk_matrix(codes, window_length)
        if len(matrix) == 0:
            continue
        blocks.append(matrix)
        account_ids.extend([account_id] * len(matrix))
        offsets.append(chunk_offsets(len(codes), window_length))
        targets.append(np.full(len(matrix), labels[account_id].as_int, dtype=np.int64))

    if not blocks:
        return TrajectoryDataset.empty(window_length, input_kind)

    dataset = TrajectoryDataset(
        window_length=window_length,
        codes=np.vstack(blocks).astype(np.int64),
        account_ids=account_ids,
        offsets=np.concatenate(offsets),
        labels=np.concatenate(targets),
        input_kind=input_kind,
    )
    logger.info(
        f"Assembled {len(dataset)} trajectories (L={window_length}): "
        f"{dataset.n_positive} positive, {dataset.n_negative} negative"
    )
    return dataset


def dataset_frame(dataset: TrajectoryDataset) -> pd.DataFrame:
    """Wide table `account_id,offset,label,c0..c{L-1}`"""
    frame = pd.DataFrame(dataset.codes, columns=[f"c{i}" for i in range(dataset.window_length)])
    frame.insert(0, "label", [AccountClass.from_int(v).value for v in dataset.labels])
    frame.insert(0, "offset", dataset.offsets)
    frame.insert(0, "account_id", dataset.account_ids)
    return frame


def export_dataset(dataset: TrajectoryDataset, path: Path) -> Path:
    write_frame(dataset_frame(dataset), path)
    logger.info(f"Wrote {len(dataset)} trajectories to {path}")
    return path
