import numpy as np
import pandas as pd
import pytest

from evaluation.metrics import (
    aggregate_reports,
    classification_report,
    empirical_cdf,
    report_frame,
    roc_auc,
    roc_curve,
    write_cdf,
    write_roc,
)
from trollscope.exceptions import EmptyInputError, LengthMismatchError, SingleClassError


def pair_count_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_matches_pair_counting():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, size=n)
        labels[:2] = [0, 1]
        # coarse scores so ties are common
        scores = rng.integers(0, 6, size=n) / 5.0
        assert roc_auc(scores, labels) == pytest.approx(pair_count_auc(scores, labels), abs=1e-12)


def test_auc_extremes_and_symmetry():
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    rng = np.random.default_rng(1)
    scores = rng.random(500)
    labels = rng.integers(0, 2, size=500)
    assert roc_auc(scores, labels) + roc_auc(scores, 1 - labels) == pytest.approx(1.0)
    assert roc_auc(scores, labels) == pytest.approx(roc_auc(np.exp(3 * scores) - 7, labels))
    assert abs(roc_auc(rng.random(20_000), rng.integers(0, 2, size=20_000)) - 0.5) < 0.02


def test_auc_errors():
    with pytest.raises(SingleClassError):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(LengthMismatchError):
        roc_auc([0.1], [0, 1])


def test_roc_curve_area_equals_auc():
    rng = np.random.default_rng(2)
    scores = rng.integers(0, 10, size=60) / 9.0
    labels = rng.integers(0, 2, size=60)
    points = roc_curve(scores, labels)
    assert (points[0].fpr, points[0].tpr) == (0.0, 0.0)
    assert (points[-1].fpr, points[-1].tpr) == (1.0, 1.0)
    fpr = np.array([p.fpr for p in points])
    tpr = np.array([p.tpr for p in points])
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    area = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    assert area == pytest.approx(roc_auc(scores, labels), abs=1e-12)


def test_classification_report_arithmetic():
    pred = [1] * 9 + [0] + [0] * 9 + [1]
    truth = [1] * 10 + [0] * 10
    report = classification_report(pred, truth)
    assert (report.tp, report.fn, report.tn, report.fp) == (9, 1, 9, 1)
    for name in ("precision", "recall", "f1", "accuracy", "tnr"):
        assert getattr(report, name) == pytest.approx(0.9)
    assert report.undefined == []


def test_undefined_ratios_are_flagged():
    report = classification_report([0, 0, 0], [1, 0, 0])
    assert report.precision == 0.0
    assert "precision" in report.undefined
    assert "f1" in report.undefined


def test_perfect_predictions():
    report = classification_report([1, 0, 1], [1, 0, 1])
    assert all(getattr(report, n) == 1.0 for n in ("accuracy", "auc", "precision", "recall", "f1", "tnr"))


def test_classification_report_errors():
    with pytest.raises(LengthMismatchError):
        classification_report([1], [1, 0])
    with pytest.raises(EmptyInputError):
        classification_report([], [])


def test_aggregate_uses_sample_std():
    reports = [
        classification_report([1, 0], [1, 0]),
        classification_report([0, 1], [1, 0]),
    ]
    aggregate = aggregate_reports(reports)
    assert aggregate.mean["accuracy"] == 0.5
    assert aggregate.std["accuracy"] == pytest.approx(np.std([1.0, 0.0], ddof=1))
    frame = report_frame(aggregate)
    assert frame["fold"].tolist() == ["0", "1", "mean", "std"]


def test_cdf_counts():
    points = empirical_cdf([0, 0, 1])
    assert [(p.x, p.cdf) for p in points] == [(0.0, pytest.approx(2 / 3)), (1.0, 1.0)]
    assert [(p.x, p.cdf) for p in empirical_cdf([0.3] * 4)] == [(0.3, 1.0)]
    with pytest.raises(EmptyInputError):
        empirical_cdf([])


def test_cdf_of_uniform_sample():
    samples = np.random.default_rng(3).random(1000)
    points = empirical_cdf(samples)
    cdf = np.array([p.cdf for p in points])
    assert np.all(np.diff(cdf) >= 0) and cdf[-1] == 1.0
    assert max(abs(p.cdf - p.x) for p in points) < 0.06


def test_csv_exports(tmp_path):
    roc = pd.read_csv(write_roc(roc_curve([0.2, 0.8], [0, 1]), tmp_path / "roc.csv"))
    assert list(roc.columns) == ["fpr", "tpr", "threshold"]
    cdf = pd.read_csv(write_cdf(empirical_cdf([0.5]), tmp_path / "cdf.csv"))
    assert cdf.values.tolist() == [[0.5, 1.0]]
