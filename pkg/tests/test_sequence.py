import numpy as np
import pytest

from behavior_tools.sequence import (
    actions_only,
    build_pairs,
    build_sequences,
    decode_pair,
    encode_pair,
    encode_sequence,
    export_sequences,
)
from conftest import make_events
from trollscope.exceptions import InvalidCodeError, InvalidPairError
from trollscope.models import ActionSym, CODE_TABLE, InputKind, State

ACTIVE = {"tweet": "tw", "retweet": "rt", "reply": "in", "mention": "in"}
PASSIVE = {"retweeted": "RT", "replied_to": "IN", "mentioned": "IN"}


def gap_oracle(kinds):
    """
    Pairs computed gap by gap: the passive events between two active events
    all flush as (S, no) except the last one, which the next active event
    answers. Trailing passives all flush.
    """
    pairs, gap = [], []
    for kind in kinds:
        if kind in PASSIVE:
            gap.append(PASSIVE[kind])
            continue
        pairs.extend((s, "no") for s in gap[:-1])
        pairs.append((gap[-1] if gap else "NO", ACTIVE[kind]))
        gap = []
    pairs.extend((s, "no") for s in gap)
    return [CODE_TABLE[(State(s), ActionSym(a))] for s, a in pairs]


@pytest.mark.parametrize("kinds,expected", [
    ([], []),
    (["tweet"], [0]),
    (["retweet", "retweet"], [1, 1]),
    (["retweeted", "tweet"], [3]),
    (["replied_to"], [10]),
    (["retweeted", "mentioned", "reply"], [6, 9]),
    (["mention", "retweeted", "retweeted", "retweet", "tweet"], [2, 6, 4, 0]),
    (["mentioned", "retweet", "retweeted"], [8, 6]),
])
def test_hand_traces(kinds, expected):
    seq = build_pairs(make_events("a", kinds), account_id="a")
    assert seq.codes().tolist() == expected


def test_random_streams_match_gap_oracle():
    rng = np.random.default_rng(1234)
    vocabulary = list(ACTIVE) + list(PASSIVE)
    for _ in range(10_000):
        kinds = [vocabulary[i] for i in rng.integers(0, len(vocabulary), size=rng.integers(0, 15))]
        seq = build_pairs(make_events("a", kinds), account_id="a")
        assert seq.codes().tolist() == gap_oracle(kinds)


def test_pair_count_law():
    # |pairs| = #active + #passive events not answered by the next event
    rng = np.random.default_rng(5)
    vocabulary = list(ACTIVE) + list(PASSIVE)
    for _ in range(500):
        kinds = [vocabulary[i] for i in rng.integers(0, len(vocabulary), size=30)]
        n_active = sum(k in ACTIVE for k in kinds)
        answered = sum(1 for a, b in zip(kinds, kinds[1:]) if a in PASSIVE and b in ACTIVE)
        n_passive = len(kinds) - n_active
        assert len(build_pairs(make_events("a", kinds), "a")) == n_active + n_passive - answered


def test_code_table_is_a_bijection():
    codes = [encode_pair(pair) for pair in CODE_TABLE]
    assert sorted(codes) == list(range(11))
    for code in range(11):
        assert encode_pair(decode_pair(code)) == code


def test_invalid_pair_and_code():
    with pytest.raises(InvalidPairError):
        encode_pair((State.NO, ActionSym.NO))
    for code in (-1, 11):
        with pytest.raises(InvalidCodeError):
            decode_pair(code)


def test_actions_only_drops_silent_steps():
    seq = build_pairs(make_events("a", ["retweeted", "replied_to", "retweet", "tweet", "mentioned"]), "a")
    assert actions_only(seq) == [ActionSym.RT, ActionSym.TW]
    assert encode_sequence(seq, InputKind.ACTIONS_ONLY).tolist() == [1, 0]


def test_export_sequences(tmp_path):
    sequences = build_sequences({"a": make_events("a", ["tweet", "retweeted"])})
    path = export_sequences(sequences, tmp_path / "seq.csv")
    assert path.read_text().splitlines() == ["account_id,offset,code", "a,0,0", "a,1,6"]
