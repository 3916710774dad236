import numpy as np
import pandas as pd
import pytest

from behavior_tools.sequence import PAIR_SYMBOLS
from behavior_tools.trajectory import (
    assemble_dataset,
    chunk_nonoverlapping,
    export_dataset,
    sliding_windows,
)
from trollscope.exceptions import UnlabeledAccountError, WindowLengthError
from trollscope.models import AccountClass, AccountSequence, InputKind


def seq_of(codes, account_id="a"):
    return AccountSequence(account_id=account_id, pairs=[PAIR_SYMBOLS[c] for c in codes])


def test_chunks_drop_remainder():
    seq = seq_of(list(range(11)) * 2)
    chunks = chunk_nonoverlapping(seq, 5)
    assert [t.offset for t in chunks] == [0, 5, 10, 15]
    assert chunks[1].codes.tolist() == [5, 6, 7, 8, 9]
    assert chunk_nonoverlapping(seq_of([1, 2]), 5) == []


def test_sliding_window_count_and_content():
    codes = np.random.default_rng(0).integers(0, 11, size=40).tolist()
    windows = sliding_windows(seq_of(codes), 7)
    assert len(windows) == 40 - 7 + 1
    for t in windows:
        assert t.codes.tolist() == codes[t.offset:t.offset + 7]


@pytest.mark.parametrize("length,L,expected", [(10, 10, 1), (9, 10, 0), (0, 3, 0), (5, 1, 5)])
def test_sliding_window_edges(length, L, expected):
    assert len(sliding_windows(seq_of([0] * length), L)) == expected


def test_window_length_must_be_positive():
    with pytest.raises(WindowLengthError):
        chunk_nonoverlapping(seq_of([0, 1]), 0)
    with pytest.raises(WindowLengthError):
        sliding_windows(seq_of([0, 1]), 0)


def test_assemble_dataset_labels_and_counts():
    sequences = {"t": seq_of([0] * 25, "t"), "u": seq_of([3] * 12, "u"), "short": seq_of([1] * 3, "short")}
    labels = {"t": AccountClass.POSITIVE, "u": AccountClass.NEGATIVE, "short": AccountClass.NEGATIVE}
    dataset = assemble_dataset(sequences, labels, 6)

    assert len(dataset) == 4 + 2
    assert dataset.n_positive == 4
    assert dataset.account_ids == ["t"] * 4 + ["u"] * 2
    assert dataset.offsets.tolist() == [0, 6, 12, 18, 0, 6]
    assert dataset.codes.shape == (6, 6)


def test_assemble_requires_labels():
    with pytest.raises(UnlabeledAccountError):
        assemble_dataset({"x": seq_of([0] * 10, "x")}, {}, 5)


def test_actions_only_dataset():
    # (RT,no) steps vanish from the actions-only alphabet
    seq = seq_of([3, 6, 4, 6, 5, 0], "a")
    dataset = assemble_dataset({"a": seq}, {"a": AccountClass.POSITIVE}, 2, InputKind.ACTIONS_ONLY)
    assert dataset.codes.tolist() == [[0, 1], [2, 0]]
    assert dataset.input_kind is InputKind.ACTIONS_ONLY


def test_empty_dataset_keeps_window_length():
    dataset = assemble_dataset({"a": seq_of([0], "a")}, {"a": AccountClass.NEGATIVE}, 4)
    assert len(dataset) == 0
    assert dataset.codes.shape == (0, 4)


def test_export_dataset(tmp_path):
    dataset = assemble_dataset({"a": seq_of([0, 1, 2, 3], "a")}, {"a": AccountClass.POSITIVE}, 2)
    frame = pd.read_csv(export_dataset(dataset, tmp_path / "traj.csv"))
    assert list(frame.columns) == ["account_id", "offset", "label", "c0", "c1"]
    assert frame["label"].tolist() == ["positive", "positive"]
    assert frame[["c0", "c1"]].values.tolist() == [[0, 1], [2, 3]]


def test_window_counts_over_random_grid():
    rng = np.random.default_rng(21)
    for _ in range(200):
        length, L = int(rng.integers(0, 301)), int(rng.integers(1, 121))
        codes = rng.integers(0, 11, size=length).tolist()
        seq = seq_of(codes)

        chunks = chunk_nonoverlapping(seq, L)
        assert len(chunks) == length // L
        joined = [c for t in chunks for c in t.codes.tolist()]
        assert joined == codes[: (length // L) * L]

        windows = sliding_windows(seq, L)
        assert len(windows) == max(0, length - L + 1)
        for a, b in zip(windows, windows[1:]):
            assert b.offset == a.offset + 1
            assert a.codes[1:].tolist() == b.codes[:-1].tolist()
