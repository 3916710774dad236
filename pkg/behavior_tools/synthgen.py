"""
Synthetic labeled timelines from Markov-chain behavioural archetypes

Each archetype is a chain over the 11 state-action codes. An account is a
sampled chain turned back into a timeline event stream that compiles to
exactly that chain.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from behavior_tools.ingest import serialize_events
from behavior_tools.sequence import PAIR_SYMBOLS
from config import SynthConfig
from trollscope.exceptions import ConfigError
from trollscope.models import (
    AccountClass,
    AccountLabel,
    AccountSequence,
    ActionSym,
    EventKind,
    N_PAIR_SYMBOLS,
    State,
    TimelineEvent,
)
from utils import write_frame

logger = logging.getLogger(__name__)

DIST_TOL = 1e-9
NO_STATE_CODES = (0, 1, 2)
SILENT_CODES = (6, 10)

_ACTIVE_KIND = {ActionSym.TW: EventKind.TWEET, ActionSym.RT: EventKind.RETWEET}
_IN_KINDS = (EventKind.REPLY, EventKind.MENTION)
_IN_FEEDBACK = (EventKind.REPLIED_TO, EventKind.MENTIONED)

TIMESTAMP_START = (1_450_000_000, 1_460_000_000)
MAX_GAP_SECONDS = 3600


class ArchetypeSpec(BaseModel):
    """
    Markov-chain behavioural profile over state-action codes

    A silent pair is only ever flushed by the next feedback event, so the
    pair after (RT,no) or (IN,no) always carries an RT or IN state. Silent
    rows therefore put no mass on the NO-state codes 0-2.
    """
    model_config = ConfigDict(extra="forbid")

    name: str
    initial: List[float] = Field(..., min_length=N_PAIR_SYMBOLS, max_length=N_PAIR_SYMBOLS)
    transition: List[List[float]]
    min_length: int = Field(600, ge=1)
    max_length: int = Field(1200, ge=1)

    @field_validator("initial")
    @classmethod
    def check_initial(cls, v):
        arr = np.asarray(v, dtype=np.float64)
        if np.any(arr < 0) or abs(arr.sum() - 1.0) > DIST_TOL:
            raise ValueError("initial must be a probability vector")
        return v

    @field_validator("transition")
    @classmethod
    def check_transition(cls, v):
        arr = np.asarray(v, dtype=np.float64)
        if arr.shape != (N_PAIR_SYMBOLS, N_PAIR_SYMBOLS):
            raise ValueError(f"transition must be {N_PAIR_SYMBOLS}x{N_PAIR_SYMBOLS}")
        if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=1) - 1.0) > DIST_TOL):
            raise ValueError("every transition row must be a probability vector")
        for code in SILENT_CODES:
            if arr[code, list(NO_STATE_CODES)].sum() > 0:
                raise ValueError(f"silent pair {PAIR_SYMBOLS[code]} cannot be followed by a NO-state pair")
        return v

    @model_validator(mode="after")
    def check_lengths(self):
        if self.min_length > self.max_length:
            raise ValueError("min_length must not exceed max_length")
        return self

    @property
    def initial_array(self) -> np.ndarray:
        return np.asarray(self.initial, dtype=np.float64)

    @property
    def transition_array(self) -> np.ndarray:
        return np.asarray(self.transition, dtype=np.float64)

    def blend(self, other: "ArchetypeSpec", mixing: float) -> "ArchetypeSpec":
        """
        Move this archetype toward another

        The result is (1 - mixing/2) * self + (mixing/2) * other, so mixing 1
        puts both archetypes on their common midpoint chain.
        """
        if not 0.0 <= mixing <= 1.0:
            raise ConfigError(f"mixing must be in [0, 1], got {mixing}")
        w = mixing / 2.0
        initial = (1.0 - w) * self.initial_array + w * other.initial_array
        transition = (1.0 - w) * self.transition_array + w * other.transition_array
        return self.model_copy(update={
            "initial": _renormalize(initial).tolist(),
            "transition": _renormalize(transition).tolist(),
        })

    def with_lengths(self, min_length: Optional[int], max_length: Optional[int]) -> "ArchetypeSpec":
        data = self.model_dump()
        if min_length is not None:
            data["min_length"] = min_length
        if max_length is not None:
            data["max_length"] = max_length
        return ArchetypeSpec.model_validate(data)


def _renormalize(p: np.ndarray) -> np.ndarray:
    return p / p.sum(axis=-1, keepdims=True)


def reachable_codes(spec: ArchetypeSpec) -> List[int]:
    """Codes a chain of this archetype can visit"""
    trans = spec.transition_array
    frontier = [c for c in range(N_PAIR_SYMBOLS) if spec.initial[c] > 0]
    seen = set(frontier)
    while frontier:
        code = frontier.pop()
        for nxt in np.flatnonzero(trans[code] > 0):
            if int(nxt) not in seen:
                seen.add(int(nxt))
                frontier.append(int(nxt))
    return sorted(seen)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


_TROLL_BASE = np.array([0.35, 0.30, 0.03, 0.12, 0.14, 0.02, 0.0, 0.02, 0.02, 0.0, 0.0])

_USER_AFTER_NO = [0.10, 0.04, 0.04, 0.06, 0.02, 0.04, 0.30, 0.06, 0.02, 0.04, 0.28]
_USER_AFTER_RT = [0.04, 0.02, 0.02, 0.30, 0.04, 0.22, 0.06, 0.14, 0.02, 0.10, 0.04]
_USER_AFTER_IN = [0.04, 0.02, 0.02, 0.14, 0.02, 0.10, 0.04, 0.30, 0.04, 0.22, 0.06]
_USER_SILENT = [0.0, 0.0, 0.0, 0.20, 0.04, 0.16, 0.10, 0.20, 0.04, 0.16, 0.10]
_USER_INITIAL = [0.30, 0.10, 0.10, 0.10, 0.05, 0.05, 0.05, 0.10, 0.05, 0.05, 0.05]


def troll_archetype() -> ArchetypeSpec:
    """
    Feedback-insensitive sharer: tweets and retweets whatever it receives
    and never stays silent
    """
    rows = np.tile(_TROLL_BASE, (N_PAIR_SYMBOLS, 1))
    shift_rt = np.zeros(N_PAIR_SYMBOLS)
    shift_rt[[4, 1]] = [0.03, -0.03]
    shift_in = np.zeros(N_PAIR_SYMBOLS)
    shift_in[[0, 1]] = [0.03, -0.03]
    rows[3:6] += shift_rt
    rows[7:10] += shift_in

    # unreachable; kept valid for the silent-row constraint
    silent = _TROLL_BASE.copy()
    silent[list(NO_STATE_CODES)] = 0.0
    for code in SILENT_CODES:
        rows[code] = silent / silent.sum()

    return ArchetypeSpec(name="troll", initial=_TROLL_BASE.tolist(), transition=rows.tolist())


def user_archetype() -> ArchetypeSpec:
    """Feedback-driven organic user: answers feedback, goes quiet without it"""
    rows = []
    for code in range(N_PAIR_SYMBOLS):
        state, action = PAIR_SYMBOLS[code].state, PAIR_SYMBOLS[code].action
        if action is ActionSym.NO:
            rows.append(_USER_SILENT)
        elif state is State.NO:
            rows.append(_USER_AFTER_NO)
        elif state is State.RT:
            rows.append(_USER_AFTER_RT)
        else:
            rows.append(_USER_AFTER_IN)
    return ArchetypeSpec(name="user", initial=list(_USER_INITIAL), transition=[list(r) for r in rows])


def default_archetypes() -> Tuple[ArchetypeSpec, ArchetypeSpec]:
    """(troll, user) archetypes"""
    return troll_archetype(), user_archetype()


def _support_archetype(name: str, support: Sequence[int]) -> ArchetypeSpec:
    support = list(support)
    uniform = np.zeros(N_PAIR_SYMBOLS)
    uniform[support] = 1.0 / len(support)
    rows = np.tile(uniform, (N_PAIR_SYMBOLS, 1))
    for code in SILENT_CODES:
        if code in support:
            continue
        fallback = np.zeros(N_PAIR_SYMBOLS)
        fallback[3:] = 1.0 / (N_PAIR_SYMBOLS - 3)
        rows[code] = fallback
    return ArchetypeSpec(name=name, initial=uniform.tolist(), transition=rows.tolist())


def cluster_archetypes() -> List[ArchetypeSpec]:
    """Three archetypes whose visited pairs are disjoint"""
    return [
        _support_archetype("broadcaster", (0, 1)),
        _support_archetype("amplifier", (3, 4, 6)),
        _support_archetype("conversationalist", (7, 9, 10)),
    ]


ARCHETYPES = {
    "troll": troll_archetype,
    "user": user_archetype,
    **{spec.name: (lambda s=spec: s) for spec in cluster_archetypes()},
}


def get_archetype(name: str) -> ArchetypeSpec:
    if name not in ARCHETYPES:
        raise ConfigError(f"unknown archetype '{name}'; available: {sorted(ARCHETYPES)}")
    return ARCHETYPES[name]()


def sample_chain(spec: ArchetypeSpec, length: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `length` codes from the archetype's Markov chain"""
    cum_initial = np.cumsum(spec.initial_array)
    cum_rows = np.cumsum(spec.transition_array, axis=1)
    draws = rng.random(length)
    chain = np.empty(length, dtype=np.int64)
    if length == 0:
        return chain

    last = N_PAIR_SYMBOLS - 1
    chain[0] = min(int(np.searchsorted(cum_initial, draws[0], side="right")), last)
    for t in range(1, length):
        row = cum_rows[chain[t - 1]]
        chain[t] = min(int(np.searchsorted(row, draws[t], side="right")), last)
    return chain


def chain_to_events(
    chain: np.ndarray,
    account_id: str,
    rng: np.random.Generator,
) -> List[TimelineEvent]:
    """
    Timeline whose compiled pair sequence is exactly `chain`

    (NO, a) becomes a lone active event, (S, a) a feedback event followed by
    an active event, and (S, no) a lone feedback event.
    """
    events: List[TimelineEvent] = []
    clock = int(rng.integers(*TIMESTAMP_START))

    def emit(kind: EventKind) -> None:
        nonlocal clock
        clock += int(rng.integers(1, MAX_GAP_SECONDS + 1))
        events.append(TimelineEvent(account_id=account_id, timestamp=clock, kind=kind, seq_no=len(events)))

    for code in chain:
        pair = PAIR_SYMBOLS[int(code)]
        if pair.state is State.RT:
            emit(EventKind.RETWEETED)
        elif pair.state is State.IN:
            emit(_IN_FEEDBACK[int(rng.integers(2))])

        if pair.action is ActionSym.IN:
            emit(_IN_KINDS[int(rng.integers(2))])
        elif pair.action is not ActionSym.NO:
            emit(_ACTIVE_KIND[pair.action])

    return events


def generate_account(
    spec: ArchetypeSpec,
    rng: np.random.Generator,
    account_id: str = "synthetic",
) -> Tuple[AccountSequence, List[TimelineEvent]]:
    """
    Sample one synthetic account

    Args:
        spec: Archetype to sample from
        rng: Random stream owned by this account
        account_id: Id stamped on the events

    Returns:
        (sampled pair sequence, timeline events that compile back to it)
    """
    length = int(rng.integers(spec.min_length, spec.max_length + 1))
    chain = sample_chain(spec, length, rng)
    events = chain_to_events(chain, account_id, rng)
    sequence = AccountSequence(account_id=account_id, pairs=[PAIR_SYMBOLS[int(c)] for c in chain])
    return sequence, events


class SyntheticCorpus(BaseModel):
    """Labeled synthetic timelines plus the chains that produced them"""
    events: Dict[str, List[TimelineEvent]] = Field(default_factory=dict)
    sequences: Dict[str, AccountSequence] = Field(default_factory=dict)
    labels: List[AccountLabel] = Field(default_factory=list)
    class_names: Dict[str, str] = Field(default_factory=dict)
    positive_archetype: Optional[ArchetypeSpec] = None
    negative_archetype: Optional[ArchetypeSpec] = None

    def flat_events(self) -> List[TimelineEvent]:
        return [e for events in self.events.values() for e in events]


def _generate_one(spec: ArchetypeSpec, seed: int, class_idx: int, index: int, account_id: str):
    rng = np.random.default_rng([seed, class_idx, index])
    return generate_account(spec, rng, account_id)


def generate_dataset(
    config: SynthConfig,
    archetypes: Optional[Tuple[ArchetypeSpec, ArchetypeSpec]] = None,
    n_jobs: int = 1,
) -> SyntheticCorpus:
    """
    Generate a labeled corpus of positive and negative accounts

    Args:
        config: Counts, archetype names, mixing and seed
        archetypes: Explicit (positive, negative) archetypes overriding the names
        n_jobs: Worker processes for account generation

    Returns:
        SyntheticCorpus; account k of a class always uses the random stream
        seeded by (seed, class index, k)
    """
    if archetypes is None:
        archetypes = (get_archetype(config.positive_archetype), get_archetype(config.negative_archetype))
    positive, negative = (a.with_lengths(config.min_length, config.max_length) for a in archetypes)

    blended_pos = positive.blend(negative, config.mixing)
    blended_neg = negative.blend(positive, config.mixing)

    plan = []
    for class_idx, (spec, count, name, label) in enumerate([
        (blended_pos, config.positive_count, config.positive_class_name, AccountClass.POSITIVE),
        (blended_neg, config.negative_count, "user", AccountClass.NEGATIVE),
    ]):
        for index in range(count):
            plan.append((spec, class_idx, index, f"{name}_{index:05d}", name, label))

    results = Parallel(n_jobs=n_jobs)(
        delayed(_generate_one)(spec, config.rng_seed, class_idx, index, account_id)
        for spec, class_idx, index, account_id, _, _ in plan
    )

    corpus = SyntheticCorpus(positive_archetype=blended_pos, negative_archetype=blended_neg)
    for (_, _, _, account_id, name, label), (sequence, events) in zip(plan, results):
        corpus.sequences[account_id] = sequence
        corpus.events[account_id] = events
        corpus.labels.append(AccountLabel(account_id=account_id, label=label))
        corpus.class_names[account_id] = name

    logger.info(
        f"Generated {config.positive_count} {config.positive_class_name} and "
        f"{config.negative_count} user accounts (mixing={config.mixing}, seed={config.rng_seed})"
    )
    return corpus


def write_corpus(corpus: SyntheticCorpus, out_dir: Path) -> Dict[str, Path]:
    """
    Persist a corpus in the ingest formats

    Returns:
        Paths of events.jsonl, labels.csv and archetypes.json
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out_dir / "events.jsonl",
        "labels": out_dir / "labels.csv",
        "archetypes": out_dir / "archetypes.json",
    }

    paths["events"].write_bytes(serialize_events(corpus.flat_events()))

    labels = pd.DataFrame(
        [(l.account_id, corpus.class_names[l.account_id]) for l in corpus.labels],
        columns=["account_id", "class"],
    )
    write_frame(labels, paths["labels"])

    archetypes = {
        "positive": corpus.positive_archetype.model_dump() if corpus.positive_archetype else None,
        "negative": corpus.negative_archetype.model_dump() if corpus.negative_archetype else None,
    }
    paths["archetypes"].write_text(json.dumps(archetypes, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    logger.info(f"Wrote synthetic corpus to {out_dir}")
    return paths


def read_archetypes(path: Path) -> Tuple[ArchetypeSpec, ArchetypeSpec]:
    """Load the (positive, negative) archetypes written by write_corpus"""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return ArchetypeSpec.model_validate(raw["positive"]), ArchetypeSpec.model_validate(raw["negative"])
