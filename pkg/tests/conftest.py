"""
Shared fixtures and small builders for the trollscope test suite
"""

import json
from typing import Dict, List, Tuple

import numpy as np
import pytest

from behavior_tools.synthgen import default_archetypes, generate_account
from config import RunConfig, SynthConfig, TrainConfig
from trollscope.models import AccountClass, AccountSequence, EventKind, TimelineEvent


def make_events(account_id: str, kinds: List[str], start: int = 1000) -> List[TimelineEvent]:
    """Events of one account, one second apart, in the given order"""
    return [
        TimelineEvent(account_id=account_id, timestamp=start + i, kind=EventKind(kind), seq_no=i)
        for i, kind in enumerate(kinds)
    ]


def ndjson(records: List[dict]) -> bytes:
    return ("\n".join(json.dumps(r) for r in records) + "\n").encode("utf-8")


def synthetic_sequences(
    n_per_class: int,
    seed: int = 0,
    length: int = 120,
) -> Tuple[Dict[str, AccountSequence], Dict[str, AccountClass]]:
    """Troll and user sequences of a fixed length drawn from the default archetypes"""
    troll, user = (a.with_lengths(length, length) for a in default_archetypes())
    sequences, labels = {}, {}
    for class_idx, (spec, label) in enumerate(((troll, AccountClass.POSITIVE), (user, AccountClass.NEGATIVE))):
        for i in range(n_per_class):
            account_id = f"{label.value}_{i:03d}"
            rng = np.random.default_rng([seed, class_idx, i])
            sequences[account_id], _ = generate_account(spec, rng, account_id)
            labels[account_id] = label
    return sequences, labels


@pytest.fixture
def tiny_train_config():
    return TrainConfig(
        window_length=10,
        hidden_sizes=(6, 6),
        dropout_rate=0.0,
        learning_rate=1e-2,
        batch_size=16,
        max_epochs=3,
        early_stop_patience=1,
        rng_seed=0,
    )


@pytest.fixture
def small_corpus():
    return synthetic_sequences(12, seed=7, length=60)


@pytest.fixture
def small_run(tmp_path):
    return RunConfig(
        window_length=10,
        folds=3,
        min_active=0,
        min_passive=0,
        sweep_step=0.1,
        out_dir=tmp_path / "out",
        train=TrainConfig(hidden_sizes=(6,), max_epochs=2, early_stop_patience=1, batch_size=32),
        synth=SynthConfig(n_accounts=12, min_length=60, max_length=80),
    )
