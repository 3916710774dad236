"""
Classification metrics, ROC curves and empirical CDFs
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from trollscope.exceptions import EmptyInputError, LengthMismatchError, SingleClassError
from trollscope.models import AggregateReport, CdfPoint, EvalReport, RocPoint
from utils import write_frame

logger = logging.getLogger(__name__)

METRIC_FIELDS = ("accuracy", "auc", "precision", "recall", "f1", "tnr")


def _binary(labels) -> np.ndarray:
    return np.asarray(labels, dtype=np.int64).reshape(-1)


def roc_auc(scores, labels) -> float:
    """
    Rank-based (Mann-Whitney) AUC; tied scores count one half

    Raises:
        LengthMismatchError: If scores and labels differ in length
        SingleClassError: If only one class is present
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = _binary(labels)
    if len(scores) != len(labels):
        raise LengthMismatchError(f"{len(scores)} scores for {len(labels)} labels")

    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUC needs both classes")

    ranks = rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> List[RocPoint]:
    """
    ROC points at every distinct score, from (0, 0) to (1, 1)

    The point for threshold t classifies positive iff score >= t.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = _binary(labels)
    if len(scores) != len(labels):
        raise LengthMismatchError(f"{len(scores)} scores for {len(labels)} labels")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC curve needs both classes")

    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    tps = np.cumsum(sorted_labels)
    fps = np.cumsum(1 - sorted_labels)
    # last index of each run of equal scores
    cut = np.r_[np.flatnonzero(np.diff(sorted_scores) != 0), len(scores) - 1]

    points = [RocPoint(fpr=0.0, tpr=0.0, threshold=float("inf"))]
    points.extend(
        RocPoint(fpr=fps[i] / n_neg, tpr=tps[i] / n_pos, threshold=float(sorted_scores[i]))
        for i in cut
    )
    return points


def classification_report(predictions, labels, scores=None) -> EvalReport:
    """
    Confusion-matrix metrics for binary predictions

    Args:
        predictions: 0/1 predictions
        labels: 0/1 ground truth
        scores: Optional ranking scores for the AUC; the predictions are
            ranked when omitted

    Returns:
        EvalReport; undefined ratios are 0 and named in `undefined`
    """
    pred = _binary(predictions)
    truth = _binary(labels)
    if len(pred) != len(truth):
        raise LengthMismatchError(f"{len(pred)} predictions for {len(truth)} labels")
    if len(truth) == 0:
        raise EmptyInputError("classification report needs at least one instance")

    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    undefined = []

    def ratio(num: int, den: int, name: str) -> float:
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp, "precision")
    recall = ratio(tp, tp + fn, "recall")
    tnr = ratio(tn, tn + fp, "tnr")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        undefined.append("f1")

    try:
        auc = roc_auc(pred if scores is None else scores, truth)
    except SingleClassError:
        auc = 0.0
        undefined.append("auc")

    return EvalReport(
        accuracy=(tp + tn) / len(truth),
        auc=auc,
        precision=precision,
        recall=recall,
        f1=f1,
        tnr=tnr,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        undefined=undefined,
    )


def aggregate_reports(reports: Sequence[EvalReport], extra: Optional[Dict[str, Sequence[float]]] = None) -> AggregateReport:
    """Unweighted mean and sample standard deviation of per-fold metrics"""
    if not reports:
        raise EmptyInputError("no reports to aggregate")
    columns = {name: [getattr(r, name) for r in reports] for name in METRIC_FIELDS}
    columns.update(extra or {})

    ddof = 1 if len(reports) > 1 else 0
    return AggregateReport(
        per_fold=list(reports),
        mean={name: float(np.mean(v)) for name, v in columns.items()},
        std={name: float(np.std(v, ddof=ddof)) for name, v in columns.items()},
    )


def empirical_cdf(values) -> List[CdfPoint]:
    """
    Right-continuous empirical CDF sampled at the sorted unique values

    Raises:
        EmptyInputError: For an empty input
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if len(values) == 0:
        raise EmptyInputError("empirical CDF of an empty sample")
    xs, counts = np.unique(values, return_counts=True)
    cdf = np.cumsum(counts) / len(values)
    cdf[-1] = 1.0
    return [CdfPoint(x=float(x), cdf=float(f)) for x, f in zip(xs, cdf)]


def report_frame(report: AggregateReport) -> pd.DataFrame:
    """Per-fold rows followed by `mean` and `std` rows"""
    rows = []
    for fold, r in enumerate(report.per_fold):
        row = {"fold": str(fold), **r.model_dump(exclude={"undefined"})}
        row["undefined"] = ";".join(r.undefined)
        rows.append(row)
    for name in ("mean", "std"):
        summary = getattr(report, name)
        rows.append({"fold": name, **summary})
    return pd.DataFrame(rows)


def write_roc(points: List[RocPoint], path: Path) -> Path:
    return write_frame(pd.DataFrame([p.model_dump() for p in points], columns=["fpr", "tpr", "threshold"]), path)


def write_cdf(points: List[CdfPoint], path: Path) -> Path:
    return write_frame(pd.DataFrame([p.model_dump() for p in points], columns=["x", "cdf"]), path)
