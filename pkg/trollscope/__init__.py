"""
trollscope - behavioural detection of influence-campaign drivers

Encodes account timelines as state-action sequences, classifies fixed-length
trajectories with a recurrent network written on numpy, and classifies
accounts by their Troll Score: the fraction of their sliding-window
trajectories classified as troll.

Example:
    >>> from trollscope import TrollScopeClient
    >>> client = TrollScopeClient()
    >>> sequences, labels = client.load("events.jsonl", "labels.csv")
    >>> params = client.train(sequences, labels)
    >>> report = client.score(sequences, labels=labels)
"""

__version__ = "0.1.0"
__license__ = "MIT"

from trollscope.exceptions import (
    TrollScopeException,
    UsageError,
    ValidationError,
    InvariantViolationError,
)
from trollscope.models import (
    AccountClass,
    AccountSequence,
    EventKind,
    InputKind,
    PairSymbol,
    TimelineEvent,
    Trajectory,
    TrajectoryDataset,
    TrollScoreReport,
)

__all__ = [
    "TrollScopeClient",
    "AccountClass",
    "AccountSequence",
    "EventKind",
    "InputKind",
    "PairSymbol",
    "TimelineEvent",
    "Trajectory",
    "TrajectoryDataset",
    "TrollScoreReport",
    "TrollScopeException",
    "UsageError",
    "ValidationError",
    "InvariantViolationError",
]


def __getattr__(name):
    # the client pulls in config, which itself imports this package
    if name == "TrollScopeClient":
        from trollscope.client import TrollScopeClient
        return TrollScopeClient
    raise AttributeError(f"module 'trollscope' has no attribute {name!r}")
