"""
Troll Score estimation, threshold sweep and account classification
"""

import logging
from pathlib import Path
from typing import Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from behavior_tools.sequence import encode_sequence
from behavior_tools.trajectory import window_matrix
from evaluation.metrics import classification_report, roc_auc
from learning.lstm import LstmParams, predict_proba
from trollscope.exceptions import (
    ConfigError,
    EmptyInputError,
    LengthMismatchError,
    SingleClassError,
    UnscorableAccountError,
    ValidationError,
)
from trollscope.models import (
    AccountClass,
    AccountSequence,
    EvalReport,
    InputKind,
    ThresholdChoice,
    ThresholdRow,
    TrollScoreEntry,
    TrollScoreReport,
)
from utils import write_frame

logger = logging.getLogger(__name__)

SWEEP_OBJECTIVES = ("balanced_accuracy", "accuracy", "precision", "recall", "f1")
TIE_TOL = 1e-12


def troll_score(
    params: LstmParams,
    seq: AccountSequence,
    window_length: int,
    decision_cutoff: float = 0.5,
    input_kind: InputKind = InputKind.STATE_ACTION,
    batch_size: int = 512,
    true_label: Optional[AccountClass] = None,
) -> TrollScoreEntry:
    """
    Fraction of an account's sliding windows classified positive

    Args:
        params: Trained classifier
        seq: Account sequence
        window_length: L
        decision_cutoff: Window is positive iff its probability >= cutoff
        input_kind: Alphabet the classifier reads
        batch_size: Windows per inference batch
        true_label: Ground truth copied into the entry

    Returns:
        TrollScoreEntry

    Raises:
        UnscorableAccountError: If the sequence is shorter than L
    """
    codes = encode_sequence(seq, input_kind)
    windows = window_matrix(codes, window_length)
    if len(windows) == 0:
        raise UnscorableAccountError(seq.account_id, len(codes), window_length)

    prob = predict_proba(params, windows, batch_size=batch_size)
    n_positive = int(np.sum(prob >= decision_cutoff))
    return TrollScoreEntry(
        account_id=seq.account_id,
        n_windows=len(windows),
        n_positive_windows=n_positive,
        troll_score=n_positive / len(windows),
        true_label=true_label,
    )


def _score_chunk(params, items, window_length, decision_cutoff, input_kind, batch_size):
    entries, unscorable = [], []
    for seq, label in items:
        try:
            entries.append(troll_score(params, seq, window_length, decision_cutoff, input_kind, batch_size, label))
        except UnscorableAccountError:
            unscorable.append(seq.account_id)
    return entries, unscorable


def score_accounts(
    params: LstmParams,
    sequences: Mapping[str, AccountSequence],
    window_length: int,
    labels: Optional[Mapping[str, AccountClass]] = None,
    decision_cutoff: float = 0.5,
    input_kind: InputKind = InputKind.STATE_ACTION,
    batch_size: int = 512,
    n_jobs: int = 1,
) -> TrollScoreReport:
    """
    Troll Scores for many accounts; too-short accounts are listed as unscorable

    Accounts keep their input order in the report.
    """
    if params.window_length and params.window_length != window_length:
        raise LengthMismatchError(f"model was trained with L={params.window_length}, scoring asked for L={window_length}")
    labels = labels or {}
    items = [(seq, labels.get(account_id)) for account_id, seq in sequences.items()]
    n_chunks = max(1, min(n_jobs, len(items)))
    chunks = [items[i::n_chunks] for i in range(n_chunks)]

    results = Parallel(n_jobs=n_jobs)(
        delayed(_score_chunk)(params, chunk, window_length, decision_cutoff, input_kind, batch_size)
        for chunk in chunks
    )

    by_account = {e.account_id: e for entries, _ in results for e in entries}
    unscorable = {a for _, skipped in results for a in skipped}
    report = TrollScoreReport(
        entries=[by_account[a] for a in sequences if a in by_account],
        unscorable=[a for a in sequences if a in unscorable],
    )
    if report.unscorable:
        logger.warning(f"{len(report.unscorable)} accounts shorter than L={window_length} were not scored")
    logger.info(f"Scored {len(report.entries)} accounts")
    return report


def threshold_grid(step: float = 0.02) -> np.ndarray:
    """{0, step, ..., 1} computed as i / n so grid points are exact decimals"""
    n = int(round(1.0 / step))
    return np.array([i / n for i in range(n + 1)], dtype=np.float64)


def _sweep_row(threshold: float, scores: np.ndarray, labels: np.ndarray) -> ThresholdRow:
    pred = (scores >= threshold).astype(np.int64)
    report = classification_report(pred, labels)
    return ThresholdRow(
        threshold=threshold,
        balanced_accuracy=(report.recall + report.tnr) / 2.0,
        accuracy=report.accuracy,
        precision=report.precision,
        recall=report.recall,
        f1=report.f1,
    )


def sweep_scores(
    scores,
    labels,
    step: float = 0.02,
    objective: str = "balanced_accuracy",
) -> ThresholdChoice:
    """
    Pick the smallest threshold maximising the objective over the grid

    Raises:
        SingleClassError: If only one class is present
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if objective not in SWEEP_OBJECTIVES:
        raise ConfigError(f"unknown sweep objective '{objective}'")
    if len(labels) == 0:
        raise EmptyInputError("threshold sweep needs scored accounts")
    if labels.min() == labels.max():
        raise SingleClassError("threshold sweep needs both classes")

    table = [_sweep_row(float(t), scores, labels) for t in threshold_grid(step)]
    values = np.array([getattr(row, objective) for row in table])
    best = int(np.flatnonzero(values >= values.max() - TIE_TOL)[0])

    return ThresholdChoice(
        threshold=table[best].threshold,
        objective=objective,
        objective_value=float(values[best]),
        table=table,
    )


def sweep_threshold(
    report: TrollScoreReport,
    step: float = 0.02,
    objective: str = "balanced_accuracy",
) -> ThresholdChoice:
    """Threshold sweep over the labeled entries of a score report"""
    labeled = report.labeled()
    choice = sweep_scores(labeled.scores(), labeled.true_labels(), step, objective)
    logger.info(f"Selected threshold {choice.threshold:.2f} ({objective}={choice.objective_value:.4f})")
    return choice


def classify_accounts(report: TrollScoreReport, threshold: float) -> TrollScoreReport:
    """Positive iff troll_score >= threshold"""
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold must be in [0, 1], got {threshold}", field="threshold")
    entries = [
        e.model_copy(update={
            "predicted": AccountClass.POSITIVE if e.troll_score >= threshold else AccountClass.NEGATIVE
        })
        for e in report.entries
    ]
    return TrollScoreReport(entries=entries, unscorable=list(report.unscorable))


def evaluate_accounts(report: TrollScoreReport) -> Tuple[EvalReport, float]:
    """
    Account-level metrics of a classified report

    Returns:
        (EvalReport whose AUC ranks by Troll Score, AUC of the binary predictions)
    """
    labeled = report.labeled()
    truth = labeled.true_labels()
    pred = np.array([e.predicted.as_int for e in labeled.entries], dtype=np.int64)
    evaluation = classification_report(pred, truth, scores=labeled.scores())
    try:
        binarized = roc_auc(pred, truth)
    except SingleClassError:
        binarized = 0.0
    return evaluation, binarized


def scores_frame(report: TrollScoreReport) -> pd.DataFrame:
    rows = [
        (
            e.account_id,
            e.n_windows,
            e.troll_score,
            e.true_label.value if e.true_label else "",
            e.predicted.value if e.predicted else "",
        )
        for e in report.entries
    ]
    return pd.DataFrame(rows, columns=["account_id", "n_windows", "troll_score", "true_label", "predicted"])


def write_scores(report: TrollScoreReport, path: Path) -> Path:
    return write_frame(scores_frame(report), path)


def read_scores(path: Path) -> TrollScoreReport:
    """Load a score report written by write_scores"""
    frame = pd.read_csv(path, dtype={"account_id": str, "true_label": str, "predicted": str}, keep_default_na=False)
    entries = []
    for row in frame.itertuples(index=False):
        n_windows = int(row.n_windows)
        entries.append(TrollScoreEntry(
            account_id=row.account_id,
            n_windows=n_windows,
            n_positive_windows=int(round(float(row.troll_score) * n_windows)),
            troll_score=float(row.troll_score),
            true_label=AccountClass(row.true_label) if row.true_label else None,
            predicted=AccountClass(row.predicted) if row.predicted else None,
        ))
    return TrollScoreReport(entries=entries)


def sweep_frame(choice: ThresholdChoice) -> pd.DataFrame:
    return pd.DataFrame(
        [row.model_dump() for row in choice.table],
        columns=["threshold", "balanced_accuracy", "accuracy", "precision", "recall", "f1"],
    )


def write_sweep(choice: ThresholdChoice, path: Path) -> Path:
    return write_frame(sweep_frame(choice), path)
