"""
State-action pair sequences compiled from chronological event streams
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from trollscope.exceptions import InvalidCodeError, InvalidPairError
from trollscope.models import (
    ACTION_CODES,
    CODE_TABLE,
    AccountSequence,
    ActionSym,
    EventKind,
    InputKind,
    N_PAIR_SYMBOLS,
    PairSymbol,
    State,
    TimelineEvent,
)
from utils import write_frame

logger = logging.getLogger(__name__)

ACTION_OF_KIND: Dict[EventKind, ActionSym] = {
    EventKind.TWEET: ActionSym.TW,
    EventKind.RETWEET: ActionSym.RT,
    EventKind.REPLY: ActionSym.IN,
    EventKind.MENTION: ActionSym.IN,
}

STATE_OF_KIND: Dict[EventKind, State] = {
    EventKind.RETWEETED: State.RT,
    EventKind.REPLIED_TO: State.IN,
    EventKind.MENTIONED: State.IN,
}

# One shared instance per symbol, indexed by code.
PAIR_SYMBOLS: List[PairSymbol] = [
    PairSymbol(state=state, action=action)
    for (state, action), _ in sorted(CODE_TABLE.items(), key=lambda item: item[1])
]


def encode_pair(pair: Tuple[State, ActionSym]) -> int:
    """
    Canonical integer code of a state-action pair

    Raises:
        InvalidPairError: For (NO, no)
    """
    state, action = State(pair[0]), ActionSym(pair[1])
    code = CODE_TABLE.get((state, action))
    if code is None:
        raise InvalidPairError(state.value, action.value)
    return code


def decode_pair(code: int) -> Tuple[State, ActionSym]:
    """
    Inverse of encode_pair

    Raises:
        InvalidCodeError: If code is outside [0, 10]
    """
    if not 0 <= int(code) < N_PAIR_SYMBOLS:
        raise InvalidCodeError(int(code))
    symbol = PAIR_SYMBOLS[int(code)]
    return symbol.state, symbol.action


def symbol(state: State, action: ActionSym) -> PairSymbol:
    return PAIR_SYMBOLS[encode_pair((state, action))]


def build_pairs(events: List[TimelineEvent], account_id: Optional[str] = None) -> AccountSequence:
    """
    Compile one account's chronological events into state-action pairs

    An active event pairs with the pending feedback state (NO when none is
    pending) and clears it. A passive event first flushes an unanswered
    pending state as (state, no), then becomes the pending state. A pending
    state surviving to the end of the stream is flushed the same way.

    Args:
        events: Events of one account sorted by (timestamp, seq_no)
        account_id: Account id for an empty stream

    Returns:
        AccountSequence in derivation order
    """
    if account_id is None:
        account_id = events[0].account_id if events else ""

    pairs: List[PairSymbol] = []
    pending: Optional[State] = None

    for event in events:
        if event.kind.is_active:
            state = pending if pending is not None else State.NO
            pairs.append(symbol(state, ACTION_OF_KIND[event.kind]))
            pending = None
        else:
            if pending is not None:
                pairs.append(symbol(pending, ActionSym.NO))
            pending = STATE_OF_KIND[event.kind]

    if pending is not None:
        pairs.append(symbol(pending, ActionSym.NO))

    return AccountSequence(account_id=account_id, pairs=pairs)


def build_sequences(grouped: Dict[str, List[TimelineEvent]]) -> Dict[str, AccountSequence]:
    """Compile every account of a grouped event stream"""
    sequences = {account_id: build_pairs(events, account_id) for account_id, events in grouped.items()}
    total = sum(len(s) for s in sequences.values())
    logger.info(f"Built {total} state-action pairs for {len(sequences)} accounts")
    return sequences


def actions_only(seq: AccountSequence) -> List[ActionSym]:
    """Project a sequence onto its sharing actions, dropping silent steps"""
    return [p.action for p in seq.pairs if p.action is not ActionSym.NO]


def encode_sequence(seq: AccountSequence, input_kind: InputKind = InputKind.STATE_ACTION) -> np.ndarray:
    """Integer codes of a sequence in the requested alphabet"""
    if input_kind is InputKind.ACTIONS_ONLY:
        return np.array([ACTION_CODES[a] for a in actions_only(seq)], dtype=np.int64)
    return seq.codes()


def sequences_frame(sequences: Dict[str, AccountSequence]) -> pd.DataFrame:
    """Long-format table `account_id,offset,code`"""
    rows = [
        (account_id, offset, pair.code)
        for account_id, seq in sequences.items()
        for offset, pair in enumerate(seq.pairs)
    ]
    return pd.DataFrame(rows, columns=["account_id", "offset", "code"])


def export_sequences(sequences: Dict[str, AccountSequence], path: Path) -> Path:
    write_frame(sequences_frame(sequences), path)
    logger.info(f"Wrote sequences to {path}")
    return path
