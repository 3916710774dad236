"""
Event log and label ingestion
"""

import io
import json
import logging
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, List, Union

import pandas as pd
from pydantic import BaseModel, ValidationError as PydanticValidationError

from trollscope.exceptions import (
    LabelConflictError,
    MalformedRecordError,
    UnknownEventKindError,
    UnknownLabelError,
    ValidationError,
)
from trollscope.models import AccountClass, AccountLabel, EventKind, TimelineEvent

logger = logging.getLogger(__name__)

ByteSource = Union[bytes, BinaryIO, Iterable[bytes]]
GroupedEvents = Dict[str, List[TimelineEvent]]

LABEL_MAP = {
    "troll": AccountClass.POSITIVE,
    "io_driver": AccountClass.POSITIVE,
    "user": AccountClass.NEGATIVE,
}

_KNOWN_KINDS = {k.value for k in EventKind}


class _EventRecord(BaseModel):
    """Wire format of one NDJSON line"""
    account_id: str
    timestamp: int
    kind: str


def _iter_lines(stream: ByteSource) -> Iterable[bytes]:
    if isinstance(stream, (bytes, bytearray)):
        return io.BytesIO(stream)
    return stream


def parse_events(stream: ByteSource) -> GroupedEvents:
    """
    Parse newline-delimited JSON events into per-account chronological streams

    Args:
        stream: Bytes, binary file, or iterable of byte lines

    Returns:
        Mapping account_id -> events sorted by (timestamp, seq_no); accounts in
        order of first appearance

    Raises:
        MalformedRecordError: If a line is not a valid record
        UnknownEventKindError: If a kind string is outside the taxonomy
    """
    grouped: GroupedEvents = {}
    seq_no = 0

    for line_no, raw in enumerate(_iter_lines(stream), start=1):
        if not raw.strip():
            continue
        try:
            record = _EventRecord.model_validate_json(raw)
        except PydanticValidationError as e:
            raise MalformedRecordError(line_no, e.errors()[0]["msg"])

        if record.kind not in _KNOWN_KINDS:
            raise UnknownEventKindError(record.kind, line_no)
        if record.timestamp < 0:
            raise MalformedRecordError(line_no, "timestamp must be non-negative")

        event = TimelineEvent(
            account_id=record.account_id,
            timestamp=record.timestamp,
            kind=EventKind(record.kind),
            seq_no=seq_no,
        )
        grouped.setdefault(record.account_id, []).append(event)
        seq_no += 1

    for events in grouped.values():
        events.sort(key=lambda e: (e.timestamp, e.seq_no))

    logger.info(f"Parsed {seq_no} events for {len(grouped)} accounts")
    return grouped


def serialize_events(events: Iterable[TimelineEvent]) -> bytes:
    """Write events in the NDJSON ingest format (seq_no is implied by order)"""
    lines = [
        json.dumps({"account_id": e.account_id, "timestamp": e.timestamp, "kind": e.kind.value})
        for e in events
    ]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def flatten_events(grouped: GroupedEvents) -> List[TimelineEvent]:
    return [e for events in grouped.values() for e in events]


def count_activities(events: List[TimelineEvent]) -> Dict[str, int]:
    n_active = sum(1 for e in events if e.is_active)
    return {"active": n_active, "passive": len(events) - n_active}


def filter_accounts(
    events: GroupedEvents,
    min_active: int = 10,
    min_passive: int = 10,
) -> GroupedEvents:
    """
    Keep accounts with enough active and passive activity

    Args:
        events: Grouped events
        min_active: Minimum number of active events
        min_passive: Minimum number of passive events

    Returns:
        Grouped events of the retained accounts (input order preserved)
    """
    if min_active < 0 or min_passive < 0:
        field = "min_active" if min_active < 0 else "min_passive"
        raise ValidationError("activity thresholds must be non-negative", field=field)

    kept: GroupedEvents = {}
    for account_id, account_events in events.items():
        counts = count_activities(account_events)
        if counts["active"] >= min_active and counts["passive"] >= min_passive:
            kept[account_id] = account_events

    dropped = len(events) - len(kept)
    if dropped:
        logger.info(f"Dropped {dropped} of {len(events)} accounts below ({min_active}, {min_passive}) activity")
    return kept


def load_labels(stream: ByteSource) -> List[AccountLabel]:
    """
    Parse `account_id,class` CSV rows (header optional)

    Args:
        stream: Bytes or binary file with UTF-8 CSV content

    Returns:
        Deduplicated labels in order of first appearance

    Raises:
        UnknownLabelError: If a class string is not troll, io_driver or user
        LabelConflictError: If an account is labeled twice with different classes
    """
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)

    try:
        frame = pd.read_csv(
            stream,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        return []
    except pd.errors.ParserError as e:
        raise MalformedRecordError(0, str(e))
    frame = frame.fillna("")

    if frame.shape[1] < 2:
        raise MalformedRecordError(1, "label rows need two columns: account_id,class")

    first_line = 1
    if frame.iloc[0, 0].strip() == "account_id":
        frame = frame.iloc[1:]
        first_line = 2

    labels: Dict[str, AccountLabel] = {}
    for line_no, (account_id, value) in enumerate(
        zip(frame.iloc[:, 0], frame.iloc[:, 1]), start=first_line
    ):
        account_id = account_id.strip()
        value = value.strip().lower()
        if value not in LABEL_MAP:
            raise UnknownLabelError(value, line_no)
        label = AccountLabel(account_id=account_id, label=LABEL_MAP[value])

        existing = labels.get(account_id)
        if existing is not None and existing.label != label.label:
            raise LabelConflictError(account_id)
        labels.setdefault(account_id, label)

    logger.info(f"Loaded {len(labels)} account labels")
    return list(labels.values())


def labels_by_account(labels: List[AccountLabel]) -> Dict[str, AccountClass]:
    return {l.account_id: l.label for l in labels}


def read_events(path: Path) -> GroupedEvents:
    """Parse an events file from disk"""
    with open(path, "rb") as f:
        return parse_events(f)


def read_labels(path: Path) -> List[AccountLabel]:
    """Parse a labels file from disk"""
    with open(path, "rb") as f:
        return load_labels(f)
