"""
Experiment orchestration: cross-validated Troll Score evaluation, length and
input-kind ablation, and the baseline comparison
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from behavior_tools.ingest import filter_accounts, labels_by_account, read_events, read_labels
from behavior_tools.sequence import build_sequences
from behavior_tools.trajectory import assemble_dataset
from config import RunConfig
from evaluation.metrics import (
    aggregate_reports,
    classification_report,
    empirical_cdf,
    report_frame,
    roc_curve,
    write_cdf,
    write_roc,
)
from evaluation.score import (
    classify_accounts,
    evaluate_accounts,
    score_accounts,
    sweep_threshold,
    write_scores,
)
from learning.baselines import knn_predict_proba, predict_logreg, train_logreg
from learning.lstm import predict_proba
from learning.train import (
    TrainingResult,
    align_config,
    stratified_holdout,
    stratified_kfold,
    stratified_kfold_indices,
    train_classifier,
    undersample,
    write_training_log,
)
from trollscope.exceptions import EmptyDatasetError, UnlabeledAccountError, ValidationError
from trollscope.models import (
    AccountClass,
    AccountSequence,
    AggregateReport,
    EvalReport,
    FoldPlan,
    InputKind,
    ThresholdChoice,
    TrajectoryDataset,
    TrainingLog,
    TrollScoreReport,
)
from utils import derive_seed, ensure_dir, write_frame

logger = logging.getLogger(__name__)

Sequences = Dict[str, AccountSequence]
Labels = Dict[str, AccountClass]


class ExperimentKind(str, Enum):
    """Experiments the orchestrator can run"""
    CROSS_VALIDATION = "cv"
    ABLATION = "ablation"
    BASELINES = "baselines"


@dataclass
class FoldOutcome:
    fold: int
    trajectory_report: EvalReport
    trajectory_scores: np.ndarray
    trajectory_labels: np.ndarray
    account_report: EvalReport
    binarized_auc: float
    threshold: ThresholdChoice
    scores: TrollScoreReport
    log: TrainingLog


@dataclass
class CvResult:
    plan: FoldPlan
    trajectory: AggregateReport
    account: AggregateReport
    folds: List[FoldOutcome] = field(default_factory=list)
    scores: TrollScoreReport = field(default_factory=TrollScoreReport)
    outputs: Dict[str, Path] = field(default_factory=dict)


def _subset(sequences: Mapping[str, AccountSequence], accounts) -> Sequences:
    return {a: sequences[a] for a in accounts if a in sequences}


def _trajectory_eval(scores: np.ndarray, labels: np.ndarray, cutoff: float) -> EvalReport:
    return classification_report((scores >= cutoff).astype(np.int64), labels, scores=scores)


def fit_fold_model(
    train_sequences: Sequences,
    labels: Labels,
    run: RunConfig,
    seed: int,
) -> Tuple[TrainingResult, TrajectoryDataset]:
    """
    Train one fold's classifier on its training accounts

    10% of the training accounts (stratified, seeded) are held out for early
    stopping; the rest are windowed and undersampled.
    """
    fold_labels = {a: labels[a] for a in train_sequences}
    fit_ids, val_ids = stratified_holdout(fold_labels, run.validation_fraction, seed)

    train_ds = assemble_dataset(_subset(train_sequences, fit_ids), labels, run.window_length, run.input_kind)
    if len(train_ds) == 0:
        raise EmptyDatasetError("fold has no training trajectories")
    train_ds = undersample(train_ds, rng_seed=seed)
    val_ds = assemble_dataset(_subset(train_sequences, val_ids), labels, run.window_length, run.input_kind)

    config = align_config(run.train, train_ds, rng_seed=seed)
    return train_classifier(train_ds, config, validation=val_ds), train_ds


def _sweep_subset(accounts: List[str], labels: Labels, per_class: Optional[int], seed: int) -> List[str]:
    if per_class is None:
        return accounts
    rng = np.random.default_rng(seed)
    chosen = []
    for cls in (AccountClass.POSITIVE, AccountClass.NEGATIVE):
        members = sorted(a for a in accounts if labels[a] is cls)
        if len(members) > per_class:
            members = sorted(members[i] for i in rng.choice(len(members), size=per_class, replace=False))
        chosen.extend(members)
    return sorted(chosen)


def run_cv_fold(
    fold: int,
    train_sequences: Sequences,
    test_sequences: Sequences,
    labels: Labels,
    run: RunConfig,
    seed: int,
) -> FoldOutcome:
    """Train, calibrate the threshold on training accounts, evaluate on test accounts"""
    logger.info(f"Fold {fold}: {len(train_sequences)} training and {len(test_sequences)} test accounts")
    result, _ = fit_fold_model(train_sequences, labels, run, seed)
    params = result.params

    test_ds = assemble_dataset(test_sequences, labels, run.window_length, run.input_kind)
    if len(test_ds) == 0:
        raise EmptyDatasetError(f"fold {fold} has no test trajectories")
    traj_scores = predict_proba(params, test_ds.codes, batch_size=run.score_batch_size)
    traj_report = _trajectory_eval(traj_scores, test_ds.labels, run.decision_cutoff)

    if run.threshold is not None:
        choice = ThresholdChoice(threshold=run.threshold, objective="fixed", objective_value=float("nan"))
    else:
        sweep_ids = _sweep_subset(sorted(train_sequences), labels, run.sweep_accounts, seed)
        train_scores = score_accounts(
            params,
            _subset(train_sequences, sweep_ids),
            run.window_length,
            labels=labels,
            decision_cutoff=run.decision_cutoff,
            input_kind=run.input_kind,
            batch_size=run.score_batch_size,
        )
        choice = sweep_threshold(train_scores, step=run.sweep_step, objective=run.sweep_objective)

    test_scores = score_accounts(
        params,
        test_sequences,
        run.window_length,
        labels=labels,
        decision_cutoff=run.decision_cutoff,
        input_kind=run.input_kind,
        batch_size=run.score_batch_size,
    )
    test_scores = classify_accounts(test_scores, choice.threshold)
    account_report, binarized = evaluate_accounts(test_scores)

    logger.info(
        f"Fold {fold}: trajectory AUC {traj_report.auc:.4f}, account AUC {account_report.auc:.4f}, "
        f"threshold {choice.threshold:.2f}"
    )
    return FoldOutcome(
        fold=fold,
        trajectory_report=traj_report,
        trajectory_scores=traj_scores,
        trajectory_labels=test_ds.labels,
        account_report=account_report,
        binarized_auc=binarized,
        threshold=choice,
        scores=test_scores,
        log=result.log,
    )


def run_trajectory_fold(
    fold: int,
    train_ds: TrajectoryDataset,
    test_ds: TrajectoryDataset,
    run: RunConfig,
    seed: int,
) -> Tuple[EvalReport, np.ndarray]:
    """Trajectory-level fold: no account scoring, the training loss drives early stopping"""
    train_ds = undersample(train_ds, rng_seed=seed)
    config = align_config(run.train, train_ds, rng_seed=seed)
    result = train_classifier(train_ds, config)
    scores = predict_proba(result.params, test_ds.codes, batch_size=run.score_batch_size)
    return _trajectory_eval(scores, test_ds.labels, run.decision_cutoff), scores


def run_baseline_fold(
    fold: int,
    train_sequences: Sequences,
    test_sequences: Sequences,
    labels: Labels,
    run: RunConfig,
    seed: int,
) -> Dict[str, EvalReport]:
    """Recurrent model, logistic regression and KNN trained on the same fold"""
    result, train_ds = fit_fold_model(train_sequences, labels, run, seed)
    test_ds = assemble_dataset(test_sequences, labels, run.window_length, run.input_kind)
    cutoff = run.decision_cutoff

    lstm_scores = predict_proba(result.params, test_ds.codes, batch_size=run.score_batch_size)
    logreg = train_logreg(train_ds, run.logreg.model_copy(update={"rng_seed": seed}))
    logreg_scores = predict_logreg(logreg, test_ds.codes)
    knn_scores = knn_predict_proba(train_ds, test_ds.codes, run.knn)

    reports = {
        "lstm": _trajectory_eval(lstm_scores, test_ds.labels, cutoff),
        "logreg": _trajectory_eval(logreg_scores, test_ds.labels, cutoff),
        "knn": _trajectory_eval(knn_scores, test_ds.labels, 0.5),
    }
    logger.info(f"Fold {fold} baselines: " + ", ".join(f"{k} AUC {r.auc:.4f}" for k, r in reports.items()))
    return reports


class Orchestrator:
    """
    Runs the multi-stage experiments over labeled account sequences

    Each experiment is a fixed sequence of stages; folds are independent and
    run through joblib with at most `run.threads` workers.
    """

    def __init__(self, run: RunConfig):
        self.run = run
        self.experiment_definitions = self._load_experiment_definitions()

    def _load_experiment_definitions(self) -> Dict[ExperimentKind, List[str]]:
        return {
            ExperimentKind.CROSS_VALIDATION: [
                "plan_folds",
                "train",
                "trajectory_eval",
                "threshold_sweep",
                "account_eval",
                "aggregate",
            ],
            ExperimentKind.ABLATION: [
                "assemble",
                "trajectory_folds",
                "train",
                "trajectory_eval",
                "aggregate",
            ],
            ExperimentKind.BASELINES: [
                "plan_folds",
                "train",
                "train_baselines",
                "trajectory_eval",
                "aggregate",
            ],
        }

    def stages(self, kind: ExperimentKind) -> List[str]:
        return list(self.experiment_definitions[ExperimentKind(kind)])

    def fold_seed(self, fold: int, *keys: int) -> int:
        return derive_seed(self.run.seed, fold, *keys)

    def load_inputs(self) -> Tuple[Sequences, Labels]:
        """
        Read, filter and compile the configured events and labels

        Returns:
            (sequences of the retained accounts, labels of those accounts)

        Raises:
            ValidationError: If the events or labels path is missing
            UnlabeledAccountError: If a retained account has no label
        """
        if self.run.events is None or self.run.labels is None:
            raise ValidationError("both an events file and a labels file are required", field="events")
        events = filter_accounts(read_events(self.run.events), self.run.min_active, self.run.min_passive)
        labels = labels_by_account(read_labels(self.run.labels))

        for account_id in events:
            if account_id not in labels:
                raise UnlabeledAccountError(account_id)
        sequences = build_sequences(events)
        return sequences, {a: labels[a] for a in sequences}

    def _parallel(self):
        return Parallel(n_jobs=self.run.threads)

    def plan_folds(self, labels: Labels) -> FoldPlan:
        return stratified_kfold(labels, self.run.folds, rng_seed=self.run.seed)

    def run_cross_validation(
        self,
        sequences: Sequences,
        labels: Labels,
        out_dir: Optional[Path] = None,
    ) -> CvResult:
        """
        Account-level k-fold evaluation of trajectory classification and
        Troll Score based account classification

        Args:
            sequences: Account sequences
            labels: Account classes
            out_dir: Where to write the reports; nothing is written when None

        Returns:
            CvResult with per-fold and aggregated reports
        """
        if self.run.split == "trajectory":
            raise ValidationError(
                "account scoring needs account-level folds; use the ablation experiment for trajectory-level splits",
                field="split",
            )
        plan = self.plan_folds(labels)
        logger.info(f"Running {plan.k}-fold cross-validation: {self.stages(ExperimentKind.CROSS_VALIDATION)}")

        outcomes = self._parallel()(
            delayed(run_cv_fold)(
                fold,
                _subset(sequences, plan.train_accounts(fold)),
                _subset(sequences, plan.test_accounts(fold)),
                labels,
                self.run,
                self.fold_seed(fold),
            )
            for fold in range(plan.k)
        )
        outcomes = sorted(outcomes, key=lambda o: o.fold)

        trajectory = aggregate_reports([o.trajectory_report for o in outcomes])
        account = aggregate_reports(
            [o.account_report for o in outcomes],
            extra={
                "binarized_auc": [o.binarized_auc for o in outcomes],
                "threshold": [o.threshold.threshold for o in outcomes],
            },
        )
        pooled = TrollScoreReport(
            entries=sorted((e for o in outcomes for e in o.scores.entries), key=lambda e: e.account_id),
            unscorable=sorted(a for o in outcomes for a in o.scores.unscorable),
        )
        result = CvResult(plan=plan, trajectory=trajectory, account=account, folds=outcomes, scores=pooled)
        logger.info(
            f"Cross-validation: trajectory AUC {trajectory.mean['auc']:.4f} ± {trajectory.std['auc']:.4f}, "
            f"account AUC {account.mean['auc']:.4f} ± {account.std['auc']:.4f}"
        )

        if out_dir is not None:
            result.outputs = self.write_cv_outputs(result, Path(out_dir))
        return result

    def write_cv_outputs(self, result: CvResult, out_dir: Path) -> Dict[str, Path]:
        out_dir = ensure_dir(out_dir)
        outputs: Dict[str, Path] = {}

        frames = []
        for level, report, extras in (
            ("trajectory", result.trajectory, {}),
            ("account", result.account, {
                "binarized_auc": [o.binarized_auc for o in result.folds],
                "threshold": [o.threshold.threshold for o in result.folds],
            }),
        ):
            frame = report_frame(report)
            for name, values in extras.items():
                frame[name] = list(values) + [report.mean[name], report.std[name]]
            frame.insert(0, "level", level)
            frames.append(frame)
        outputs["eval_report"] = write_frame(pd.concat(frames, ignore_index=True), out_dir / "eval_report.csv")

        traj_scores = np.concatenate([o.trajectory_scores for o in result.folds])
        traj_labels = np.concatenate([o.trajectory_labels for o in result.folds])
        outputs["roc_trajectory"] = write_roc(roc_curve(traj_scores, traj_labels), out_dir / "roc_trajectory.csv")

        labeled = result.scores.labeled()
        scores, truth = labeled.scores(), labeled.true_labels()
        if 0 < truth.sum() < len(truth):
            outputs["roc_account"] = write_roc(roc_curve(scores, truth), out_dir / "roc_account.csv")
        if truth.sum() > 0:
            outputs["cdf_positive"] = write_cdf(empirical_cdf(scores[truth == 1]), out_dir / "cdf_positive.csv")
        if truth.sum() < len(truth):
            outputs["cdf_negative"] = write_cdf(empirical_cdf(scores[truth == 0]), out_dir / "cdf_negative.csv")

        outputs["troll_scores"] = write_scores(result.scores, out_dir / "troll_scores.csv")
        thresholds = pd.DataFrame(
            [(o.fold, o.threshold.threshold, o.threshold.objective, o.threshold.objective_value) for o in result.folds],
            columns=["fold", "threshold", "objective", "objective_value"],
        )
        outputs["thresholds"] = write_frame(thresholds, out_dir / "thresholds.csv")
        for o in result.folds:
            outputs[f"train_log_fold{o.fold}"] = write_training_log(o.log, out_dir / f"train_log_fold{o.fold}.csv")
        return outputs

    def trajectory_folds(self, dataset: TrajectoryDataset) -> np.ndarray:
        """
        Fold index of every trajectory

        Folds are dealt over accounts, so all windows of an account share a
        fold, unless `split` is "trajectory".
        """
        if self.run.split == "trajectory":
            return stratified_kfold_indices(dataset.labels, self.run.folds, rng_seed=self.run.seed)
        account_labels = {
            a: AccountClass.from_int(int(l)) for a, l in zip(dataset.account_ids, dataset.labels)
        }
        plan = self.plan_folds(account_labels)
        return np.array([plan.assignment[a] for a in dataset.account_ids], dtype=np.int64)

    def run_trajectory_cv(
        self,
        sequences: Sequences,
        labels: Labels,
        window_length: int,
        input_kind: InputKind,
    ) -> Tuple[AggregateReport, TrajectoryDataset]:
        """Stratified k-fold trajectory classification at one window length and input kind"""
        dataset = assemble_dataset(sequences, labels, window_length, input_kind)
        if len(dataset) == 0:
            raise EmptyDatasetError(f"no trajectories of length {window_length}")
        folds = self.trajectory_folds(dataset)
        run =self.run.model_copy(update={"window_length": window_length, "input_kind": input_kind})

        outcomes = self._parallel()(
            delayed(run_trajectory_fold)(
                fold,
                dataset.subset(np.flatnonzero(folds != fold)),
                dataset.subset(np.flatnonzero(folds == fold)),
                run,
                self.fold_seed(fold, window_length),
            )
            for fold in range(self.run.folds)
        )
        return aggregate_reports([report for report, _ in outcomes]), dataset

    def run_ablation(self, sequences: Sequences, labels: Labels, out_dir: Optional[Path] = None) -> pd.DataFrame:
        """
        Trajectory-level CV for every window length and input kind

        Returns:
            One row per (input_kind, L) with trajectory counts and mean/std metrics
        """
        rows = []
        for input_kind in InputKind:
            for window_length in self.run.ablation_lengths:
                report, dataset = self.run_trajectory_cv(sequences, labels, window_length, input_kind)
                row = {
                    "input_kind": input_kind.value,
                    "L": window_length,
                    "n_positive": dataset.n_positive,
                    "n_negative": dataset.n_negative,
                }
                for name in ("auc", "accuracy", "precision", "recall", "f1"):
                    row[f"{name}_mean"] = report.mean[name]
                    row[f"{name}_std"] = report.std[name]
                rows.append(row)
                logger.info(f"Ablation {input_kind.value} L={window_length}: AUC {report.mean['auc']:.4f}")

        frame = pd.DataFrame(rows)
        if out_dir is not None:
            write_frame(frame, ensure_dir(out_dir) / "ablation.csv")
        return frame

    def run_baseline_comparison(
        self,
        sequences: Sequences,
        labels: Labels,
        out_dir: Optional[Path] = None,
    ) -> Dict[str, AggregateReport]:
        """
        Trajectory AUC of the recurrent model against logistic regression and
        KNN on identical account-level folds
        """
        plan = self.plan_folds(labels)
        outcomes = self._parallel()(
            delayed(run_baseline_fold)(
                fold,
                _subset(sequences, plan.train_accounts(fold)),
                _subset(sequences, plan.test_accounts(fold)),
                labels,
                self.run,
                self.fold_seed(fold),
            )
            for fold in range(plan.k)
        )
        reports = {
            model: aggregate_reports([fold_reports[model] for fold_reports in outcomes])
            for model in ("lstm", "logreg", "knn")
        }
        if out_dir is not None:
            rows = []
            for model, report in reports.items():
                row = {"model": model}
                for name in ("auc", "accuracy", "precision", "recall", "f1", "tnr"):
                    row[f"{name}_mean"] = report.mean[name]
                    row[f"{name}_std"] = report.std[name]
                rows.append(row)
            write_frame(pd.DataFrame(rows), ensure_dir(out_dir) / "baselines.csv")
        return reports
