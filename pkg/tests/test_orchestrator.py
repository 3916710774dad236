import pandas as pd
import pytest

from behavior_tools.trajectory import assemble_dataset
from orchestrator import ExperimentKind, Orchestrator
from trollscope.exceptions import ValidationError
from trollscope.models import InputKind


def test_stages_are_declared_per_experiment(small_run):
    orchestrator = Orchestrator(small_run)
    assert orchestrator.stages(ExperimentKind.CROSS_VALIDATION)[0] == "plan_folds"
    assert "train_baselines" in orchestrator.stages("baselines")


def test_cross_validation_outputs(small_run, small_corpus, tmp_path):
    sequences, labels = small_corpus
    result = Orchestrator(small_run).run_cross_validation(sequences, labels, tmp_path)

    assert len(result.folds) == 3
    assert sorted(e.account_id for e in result.scores.entries) == sorted(sequences)
    # every account is tested exactly once
    tested = [e.account_id for o in result.folds for e in o.scores.entries]
    assert len(tested) == len(set(tested))
    for fold in result.folds:
        train = set(result.plan.train_accounts(fold.fold))
        assert not train & {e.account_id for e in fold.scores.entries}
        assert fold.threshold.threshold in {i / 10 for i in range(11)}

    report = pd.read_csv(tmp_path / "eval_report.csv")
    assert report["level"].tolist() == ["trajectory"] * 5 + ["account"] * 5
    assert {"binarized_auc", "threshold"} <= set(report.columns)
    for name in ("roc_trajectory.csv", "roc_account.csv", "cdf_positive.csv", "cdf_negative.csv",
                 "troll_scores.csv", "thresholds.csv", "train_log_fold0.csv"):
        assert (tmp_path / name).exists()


def test_cross_validation_is_deterministic(small_run, small_corpus):
    sequences, labels = small_corpus
    a = Orchestrator(small_run).run_cross_validation(sequences, labels)
    b = Orchestrator(small_run).run_cross_validation(sequences, labels)
    assert a.account.mean == b.account.mean
    assert a.scores == b.scores


def test_parallel_folds_match_serial(small_run, small_corpus):
    sequences, labels = small_corpus
    serial = Orchestrator(small_run).run_cross_validation(sequences, labels)
    parallel = Orchestrator(small_run.model_copy(update={"threads": 3})).run_cross_validation(sequences, labels)
    assert serial.trajectory.mean == parallel.trajectory.mean
    assert serial.scores == parallel.scores


def test_fixed_threshold_skips_the_sweep(small_run, small_corpus):
    sequences, labels = small_corpus
    result = Orchestrator(small_run.model_copy(update={"threshold": 0.4})).run_cross_validation(sequences, labels)
    assert all(o.threshold.threshold == 0.4 for o in result.folds)


def test_trajectory_split_is_rejected_for_account_scoring(small_run, small_corpus):
    sequences, labels = small_corpus
    with pytest.raises(ValidationError):
        Orchestrator(small_run.model_copy(update={"split": "trajectory"})).run_cross_validation(sequences, labels)


def test_ablation_table(small_run, small_corpus, tmp_path):
    sequences, labels = small_corpus
    run = small_run.model_copy(update={"ablation_lengths": [5, 10]})
    frame = Orchestrator(run).run_ablation(sequences, labels, tmp_path)
    assert frame[["input_kind", "L"]].values.tolist() == [
        ["state_action", 5], ["state_action", 10], ["actions_only", 5], ["actions_only", 10],
    ]
    assert (tmp_path / "ablation.csv").exists()


def test_baseline_comparison(small_run, small_corpus, tmp_path):
    sequences, labels = small_corpus
    reports = Orchestrator(small_run).run_baseline_comparison(sequences, labels, tmp_path)
    assert set(reports) == {"lstm", "logreg", "knn"}
    frame = pd.read_csv(tmp_path / "baselines.csv")
    assert frame["model"].tolist() == ["lstm", "logreg", "knn"]
    assert all(0.0 <= v <= 1.0 for v in frame["auc_mean"])


def test_ablation_folds_keep_each_account_on_one_side(small_run, small_corpus):
    sequences, labels = small_corpus
    dataset = assemble_dataset(sequences, labels, 10, InputKind.STATE_ACTION)
    folds = Orchestrator(small_run).trajectory_folds(dataset)
    for fold in range(small_run.folds):
        test_ids = {a for a, f in zip(dataset.account_ids, folds) if f == fold}
        train_ids = {a for a, f in zip(dataset.account_ids, folds) if f != fold}
        assert test_ids and not test_ids & train_ids


def test_trajectory_split_deals_windows_individually(small_run, small_corpus):
    sequences, labels = small_corpus
    dataset = assemble_dataset(sequences, labels, 10, InputKind.STATE_ACTION)
    run = small_run.model_copy(update={"split": "trajectory"})
    folds = Orchestrator(run).trajectory_folds(dataset)
    per_account = {}
    for account_id, fold in zip(dataset.account_ids, folds):
        per_account.setdefault(account_id, set()).add(int(fold))
    assert any(len(f) > 1 for f in per_account.values())
