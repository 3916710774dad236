"""
Pydantic models for events, sequences, trajectories and reports
"""

from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from trollscope.exceptions import InvalidPairError, InvalidCodeError, LengthMismatchError


CODE_TABLE_VERSION = 1
N_PAIR_SYMBOLS = 11
N_ACTION_SYMBOLS = 3


class EventKind(str, Enum):
    """Raw sharing activities found in an account timeline"""
    TWEET = "tweet"
    RETWEET = "retweet"
    REPLY = "reply"
    MENTION = "mention"
    RETWEETED = "retweeted"
    REPLIED_TO = "replied_to"
    MENTIONED = "mentioned"

    @property
    def is_active(self) -> bool:
        return self in _ACTIVE_KINDS


_ACTIVE_KINDS = frozenset({EventKind.TWEET, EventKind.RETWEET, EventKind.REPLY, EventKind.MENTION})


class AccountClass(str, Enum):
    """Binary account class (positive = troll / IO driver)"""
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def as_int(self) -> int:
        return 1 if self is AccountClass.POSITIVE else 0

    @classmethod
    def from_int(cls, value: int) -> "AccountClass":
        return cls.POSITIVE if int(value) == 1 else cls.NEGATIVE


class State(str, Enum):
    """Most recent feedback condition of an account"""
    NO = "NO"
    RT = "RT"
    IN = "IN"


class ActionSym(str, Enum):
    """What an account does from a state"""
    TW = "tw"
    RT = "rt"
    IN = "in"
    NO = "no"


class InputKind(str, Enum):
    """Alphabet a trajectory is written in"""
    STATE_ACTION = "state_action"
    ACTIONS_ONLY = "actions_only"

    @property
    def alphabet_size(self) -> int:
        return N_PAIR_SYMBOLS if self is InputKind.STATE_ACTION else N_ACTION_SYMBOLS


# Frozen canonical ordering: states NO < RT < IN, actions tw < rt < in < no.
CODE_TABLE: Dict[tuple, int] = {
    (State.NO, ActionSym.TW): 0,
    (State.NO, ActionSym.RT): 1,
    (State.NO, ActionSym.IN): 2,
    (State.RT, ActionSym.TW): 3,
    (State.RT, ActionSym.RT): 4,
    (State.RT, ActionSym.IN): 5,
    (State.RT, ActionSym.NO): 6,
    (State.IN, ActionSym.TW): 7,
    (State.IN, ActionSym.RT): 8,
    (State.IN, ActionSym.IN): 9,
    (State.IN, ActionSym.NO): 10,
}

ACTION_CODES: Dict[ActionSym, int] = {ActionSym.TW: 0, ActionSym.RT: 1, ActionSym.IN: 2}


class PairSymbol(BaseModel):
    """One of the 11 observable state-action pairs"""
    model_config = ConfigDict(frozen=True)

    state: State
    action: ActionSym

    @model_validator(mode="after")
    def check_observable(self):
        if self.state is State.NO and self.action is ActionSym.NO:
            raise InvalidPairError(self.state.value, self.action.value)
        return self

    @property
    def code(self) -> int:
        return CODE_TABLE[(self.state, self.action)]

    def __str__(self) -> str:
        return f"({self.state.value},{self.action.value})"


class TimelineEvent(BaseModel):
    """A single timestamped activity of one account"""
    model_config = ConfigDict(frozen=True)

    account_id: str
    timestamp: int = Field(..., ge=0, description="Seconds since epoch")
    kind: EventKind
    seq_no: int = Field(0, ge=0, description="Input-order index")

    @property
    def is_active(self) -> bool:
        return self.kind.is_active


class AccountLabel(BaseModel):
    """Ground-truth class of an account"""
    model_config = ConfigDict(frozen=True)

    account_id: str
    label: AccountClass


class AccountSequence(BaseModel):
    """Chronological state-action pairs of one account"""
    account_id: str
    pairs: List[PairSymbol] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def codes(self) -> np.ndarray:
        return np.fromiter((p.code for p in self.pairs), dtype=np.int64, count=len(self.pairs))


class Trajectory(BaseModel):
    """Fixed-length window of symbol codes with provenance"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    codes: np.ndarray
    account_id: str
    offset: int = Field(..., ge=0)
    label: Optional[AccountClass] = None

    @field_validator("codes")
    @classmethod
    def check_codes(cls, v):
        v = np.asarray(v, dtype=np.int64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("trajectory codes must be a non-empty 1-d array")
        bad = v[(v < 0) | (v >= N_PAIR_SYMBOLS)]
        if bad.size:
            raise InvalidCodeError(int(bad[0]))
        return v

    @property
    def window_length(self) -> int:
        return int(self.codes.shape[0])


class TrajectoryDataset(BaseModel):
    """Labeled trajectories sharing one window length, stored column-wise"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    window_length: int = Field(..., ge=1)
    codes: np.ndarray
    account_ids: List[str] = Field(default_factory=list)
    offsets: np.ndarray
    labels: np.ndarray
    input_kind: InputKind = InputKind.STATE_ACTION

    @model_validator(mode="after")
    def check_shapes(self):
        n = len(self.account_ids)
        if self.codes.shape != (n, self.window_length):
            raise LengthMismatchError(
                f"codes shape {self.codes.shape} does not match ({n}, {self.window_length})"
            )
        if self.offsets.shape != (n,) or self.labels.shape != (n,):
            raise LengthMismatchError("offsets and labels must align with trajectories")
        return self

    @classmethod
    def empty(cls, window_length: int, input_kind: InputKind = InputKind.STATE_ACTION) -> "TrajectoryDataset":
        return cls(
            window_length=window_length,
            codes=np.zeros((0, window_length), dtype=np.int64),
            account_ids=[],
            offsets=np.zeros(0, dtype=np.int64),
            labels=np.zeros(0, dtype=np.int64),
            input_kind=input_kind,
        )

    def __len__(self) -> int:
        return len(self.account_ids)

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive

    @property
    def class_counts(self) -> Dict[str, int]:
        return {AccountClass.POSITIVE.value: self.n_positive, AccountClass.NEGATIVE.value: self.n_negative}

    def subset(self, indices) -> "TrajectoryDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return TrajectoryDataset(
            window_length=self.window_length,
            codes=self.codes[idx],
            account_ids=[self.account_ids[i] for i in idx],
            offsets=self.offsets[idx],
            labels=self.labels[idx],
            input_kind=self.input_kind,
        )

    def for_accounts(self, accounts) -> "TrajectoryDataset":
        wanted = set(accounts)
        return self.subset([i for i, a in enumerate(self.account_ids) if a in wanted])

    def trajectories(self) -> List[Trajectory]:
        return [
            Trajectory(
                codes=self.codes[i],
                account_id=self.account_ids[i],
                offset=int(self.offsets[i]),
                label=AccountClass.from_int(self.labels[i]),
            )
            for i in range(len(self))
        ]


class TrollScoreEntry(BaseModel):
    """Troll Score of one account"""
    account_id: str
    n_windows: int = Field(..., ge=1)
    n_positive_windows: int = Field(..., ge=0)
    troll_score: float = Field(..., ge=0.0, le=1.0)
    true_label: Optional[AccountClass] = None
    predicted: Optional[AccountClass] = None


class TrollScoreReport(BaseModel):
    """Troll Scores of all scorable accounts plus the accounts too short to score"""
    entries: List[TrollScoreEntry] = Field(default_factory=list)
    unscorable: List[str] = Field(default_factory=list)

    def scores(self) -> np.ndarray:
        return np.array([e.troll_score for e in self.entries], dtype=np.float64)

    def true_labels(self) -> np.ndarray:
        return np.array([e.true_label.as_int for e in self.entries], dtype=np.int64)

    def labeled(self) -> "TrollScoreReport":
        return TrollScoreReport(
            entries=[e for e in self.entries if e.true_label is not None],
            unscorable=list(self.unscorable),
        )


class ThresholdRow(BaseModel):
    """Classification quality at one Troll Score threshold"""
    threshold: float
    balanced_accuracy: float
    accuracy: float
    precision: float
    recall: float
    f1: float


class ThresholdChoice(BaseModel):
    """Result of a threshold sweep"""
    threshold: float = Field(..., ge=0.0, le=1.0)
    objective: str = "balanced_accuracy"
    objective_value: float
    table: List[ThresholdRow] = Field(default_factory=list)


class EvalReport(BaseModel):
    """Confusion-matrix family metrics plus AUC"""
    accuracy: float
    auc: float
    precision: float
    recall: float
    f1: float
    tnr: float
    tp: int
    fp: int
    tn: int
    fn: int
    undefined: List[str] = Field(default_factory=list)


class AggregateReport(BaseModel):
    """Per-fold reports with unweighted mean and sample standard deviation"""
    per_fold: List[EvalReport] = Field(default_factory=list)
    mean: Dict[str, float] = Field(default_factory=dict)
    std: Dict[str, float] = Field(default_factory=dict)


class RocPoint(BaseModel):
    fpr: float
    tpr: float
    threshold: float


class CdfPoint(BaseModel):
    x: float
    cdf: float


class FoldPlan(BaseModel):
    """Assignment of accounts to stratified cross-validation folds"""
    k: int = Field(..., ge=2)
    assignment: Dict[str, int] = Field(default_factory=dict)
    fold_counts: List[Dict[str, int]] = Field(default_factory=list)

    def test_accounts(self, fold: int) -> List[str]:
        return sorted(a for a, f in self.assignment.items() if f == fold)

    def train_accounts(self, fold: int) -> List[str]:
        return sorted(a for a, f in self.assignment.items() if f != fold)


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: Optional[float] = None
    val_auc: Optional[float] = None


class TrainingLog(BaseModel):
    """Per-epoch losses of one training run"""
    epochs: List[EpochRecord] = Field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False


class TrialResult(BaseModel):
    """One row of the random-search trial table"""
    trial: int
    hidden_width: int
    dropout_rate: float
    learning_rate: float
    batch_size: int
    val_auc: float
    val_loss: float
    best_epoch: int


class IndicatorVector(BaseModel):
    """Visited state-action pairs of one account"""
    account_id: str
    bits: List[int] = Field(..., min_length=N_PAIR_SYMBOLS, max_length=N_PAIR_SYMBOLS)


class ClusterRow(BaseModel):
    account_id: str
    pc1: float
    pc2: float
    cluster: int
    label: Optional[AccountClass] = None
    troll_score: Optional[float] = None


class ClusterSummary(BaseModel):
    """Class composition and behavioural profile of one cluster"""
    cluster: int
    n_accounts: int
    n_positive: int
    n_negative: int
    pct_of_positive: float
    pct_of_negative: float
    visit_rates: List[float] = Field(default_factory=list)
    dominant_pairs: List[str] = Field(default_factory=list)
    positive_cdf: List[CdfPoint] = Field(default_factory=list)
    negative_cdf: List[CdfPoint] = Field(default_factory=list)


class ClusterReport(BaseModel):
    rows: List[ClusterRow] = Field(default_factory=list)
    clusters: List[ClusterSummary] = Field(default_factory=list)
    explained_variance: List[float] = Field(default_factory=list)
