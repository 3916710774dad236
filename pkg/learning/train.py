"""
Training orchestration: balancing, stratified folds, early-stopped training
and random hyper-parameter search
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from config import SearchSpace, TrainConfig
from evaluation.metrics import roc_auc
from learning.lstm import ForwardMode, LstmParams, backward, forward, init_params, mean_bce, predict_proba
from learning.optim import adam_step, clip_by_global_norm, init_moments
from trollscope.exceptions import (
    EmptyClassError,
    EmptyDatasetError,
    InsufficientClassMembersError,
    LengthMismatchError,
)
from trollscope.models import (
    AccountClass,
    AccountLabel,
    EpochRecord,
    FoldPlan,
    TrainingLog,
    TrajectoryDataset,
    TrialResult,
)
from utils import write_frame

logger = logging.getLogger(__name__)

LabelSource = Union[Mapping[str, AccountClass], Sequence[AccountLabel]]


def _as_label_map(labels: LabelSource) -> Dict[str, AccountClass]:
    if isinstance(labels, Mapping):
        return dict(labels)
    return {l.account_id: l.label for l in labels}


def undersample(dataset: TrajectoryDataset, rng_seed: int = 0) -> TrajectoryDataset:
    """
    Randomly drop majority-class trajectories down to the minority count

    Args:
        dataset: Labeled trajectories
        rng_seed: Seed for the draw

    Returns:
        Balanced dataset; every minority trajectory kept, original order preserved

    Raises:
        EmptyClassError: If either class has no trajectories
    """
    pos = np.flatnonzero(dataset.labels == 1)
    neg = np.flatnonzero(dataset.labels == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise EmptyClassError(f"cannot undersample with {len(pos)} positive and {len(neg)} negative trajectories")

    if len(pos) == len(neg):
        return dataset

    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    rng = np.random.default_rng(rng_seed)
    kept = rng.choice(majority, size=len(minority), replace=False)
    keep = np.sort(np.concatenate([minority, kept]))

    logger.info(f"Undersampled {len(majority)} majority trajectories to {len(minority)}")
    return dataset.subset(keep)


def stratified_kfold_indices(labels: Sequence[int], k: int, rng_seed: int = 0) -> np.ndarray:
    """
    Fold index for every item, stratified by binary label

    Items of each class are shuffled (seeded) and dealt round-robin; the
    negative deal continues where the positive one stopped so fold sizes
    stay within one of each other too.

    Raises:
        InsufficientClassMembersError: If a class has fewer than k items
    """
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise InsufficientClassMembersError(f"k must be >= 2, got {k}")

    rng = np.random.default_rng(rng_seed)
    folds = np.full(len(labels), -1, dtype=np.int64)
    start = 0
    for cls in (1, 0):
        members = np.flatnonzero(labels == cls)
        if len(members) < k:
            name = AccountClass.from_int(cls).value
            raise InsufficientClassMembersError(f"class {name} has {len(members)} members, fewer than k={k}")
        shuffled = members[rng.permutation(len(members))]
        folds[shuffled] = (start + np.arange(len(members))) % k
        start = (start + len(members)) % k
    return folds


def stratified_kfold(labels: LabelSource, k: int, rng_seed: int = 0) -> FoldPlan:
    """
    Deal labeled accounts into k stratified folds

    Args:
        labels: Account labels (sequence or mapping)
        k: Number of folds
        rng_seed: Seed of the per-class shuffle

    Returns:
        FoldPlan with the assignment and per-fold class counts
    """
    label_map = _as_label_map(labels)
    accounts = sorted(label_map)
    ints = [label_map[a].as_int for a in accounts]
    folds = stratified_kfold_indices(ints, k, rng_seed)

    counts = [{AccountClass.POSITIVE.value: 0, AccountClass.NEGATIVE.value: 0} for _ in range(k)]
    for account, fold in zip(accounts, folds):
        counts[fold][label_map[account].value] += 1

    logger.info(f"Planned {k} folds over {len(accounts)} accounts")
    return FoldPlan(k=k, assignment={a: int(f) for a, f in zip(accounts, folds)}, fold_counts=counts)


def stratified_holdout(
    labels: LabelSource,
    fraction: float,
    rng_seed: int = 0,
) -> Tuple[List[str], List[str]]:
    """
    Split accounts into (train, held-out) with a per-class fraction held out

    Each class with at least two members contributes round(fraction * n),
    clipped to [1, n - 1], accounts to the held-out side.
    """
    label_map = _as_label_map(labels)
    rng = np.random.default_rng(rng_seed)
    train, held = [], []
    for cls in (AccountClass.POSITIVE, AccountClass.NEGATIVE):
        members = sorted(a for a, l in label_map.items() if l is cls)
        if len(members) < 2:
            train.extend(members)
            continue
        n_held = min(max(1, int(round(fraction * len(members)))), len(members) - 1)
        order = rng.permutation(len(members))
        held.extend(members[i] for i in order[:n_held])
        train.extend(members[i] for i in order[n_held:])
    return sorted(train), sorted(held)


def check_compatible(dataset: TrajectoryDataset, config: TrainConfig) -> None:
    if dataset.window_length != config.window_length:
        raise LengthMismatchError(
            f"dataset trajectories have L={dataset.window_length}, config expects L={config.window_length}"
        )
    if dataset.input_kind.alphabet_size != config.input_size:
        raise LengthMismatchError(
            f"dataset alphabet has {dataset.input_kind.alphabet_size} symbols, config expects {config.input_size}"
        )


def align_config(config: TrainConfig, dataset: TrajectoryDataset, **overrides) -> TrainConfig:
    """Copy of config matching the dataset's window length and alphabet"""
    update = {"window_length": dataset.window_length, "input_size": dataset.input_kind.alphabet_size}
    update.update(overrides)
    return TrainConfig.model_validate({**config.model_dump(), **update})


@dataclass
class TrainingResult:
    params: LstmParams
    log: TrainingLog
    config: TrainConfig


def evaluate_loss(params: LstmParams, dataset: TrajectoryDataset, batch_size: int = 512) -> Tuple[float, Optional[float]]:
    """Inference-mode mean BCE and AUC (None when one class is missing)"""
    prob = predict_proba(params, dataset.codes, batch_size=batch_size)
    loss = mean_bce(prob, dataset.labels)
    auc = None
    if 0 < dataset.n_positive < len(dataset):
        auc = roc_auc(prob, dataset.labels)
    return loss, auc


def train_classifier(
    dataset: TrajectoryDataset,
    config: TrainConfig,
    validation: Optional[TrajectoryDataset] = None,
) -> TrainingResult:
    """
    Mini-batch Adam training with early stopping

    Args:
        dataset: Training trajectories (balanced upstream)
        config: Architecture and optimisation settings
        validation: Held-out trajectories monitored for early stopping; the
            training loss is monitored when absent or empty

    Returns:
        TrainingResult with the best-monitored-loss parameters and the epoch log
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    check_compatible(dataset, config)
    if validation is not None and len(validation) == 0:
        validation = None
    if validation is not None:
        check_compatible(validation, config)

    shuffle_rng, dropout_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(config.rng_seed).spawn(2))
    params = init_params(config, rng_seed=config.rng_seed)
    moments = init_moments(params)

    log = TrainingLog()
    best_params = params.copy()
    best_loss = math.inf
    wait = 0
    step = 0
    n = len(dataset)

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            labels = dataset.labels[batch]
            prob, cache = forward(
                params,
                dataset.codes[batch],
                ForwardMode.TRAIN,
                rng=dropout_rng,
                dropout_rate=config.dropout_rate,
            )
            total += mean_bce(prob, labels) * len(batch)
            grads = backward(params, cache, labels)
            norm = clip_by_global_norm(grads, config.grad_clip_norm)
            step += 1
            adam_step(params, grads, moments, step, config)
            logger.debug(f"epoch {epoch} step {step}: grad norm {norm:.4f}")

        record = EpochRecord(epoch=epoch, train_loss=total / n)
        if validation is not None:
            record.val_loss, record.val_auc = evaluate_loss(params, validation)
        log.epochs.append(record)

        monitored = record.val_loss if validation is not None else record.train_loss
        logger.info(
            f"Epoch {epoch}/{config.max_epochs}: train_loss={record.train_loss:.4f} "
            f"val_loss={record.val_loss} val_auc={record.val_auc}"
        )

        if monitored < best_loss:
            best_loss = monitored
            best_params = params.copy()
            log.best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait > config.early_stop_patience:
                log.stopped_early = True
                logger.info(f"Early stop after epoch {epoch} (best epoch {log.best_epoch})")
                break

    return TrainingResult(params=best_params, log=log, config=config)


@dataclass
class SearchResult:
    best_config: TrainConfig
    best_trial: int
    trials: List[TrialResult] = field(default_factory=list)
    best_params: Optional[LstmParams] = None


def sample_search_configs(space: SearchSpace, base: TrainConfig) -> List[TrainConfig]:
    """
    Draw `space.budget` configs from one seeded stream

    Trial i is the same for every budget greater than i.
    """
    rng = np.random.default_rng(space.seed)
    log_lo, log_hi = np.log(space.learning_rate_range[0]), np.log(space.learning_rate_range[1])
    configs = []
    for trial in range(space.budget):
        width = int(rng.choice(space.hidden_widths))
        dropout = float(rng.uniform(*space.dropout_range))
        lr = float(np.exp(rng.uniform(log_lo, log_hi)))
        batch = int(rng.choice(space.batch_sizes))
        configs.append(base.model_copy(update={
            "hidden_sizes": (width,) * len(base.hidden_sizes),
            "dropout_rate": dropout,
            "learning_rate": lr,
            "batch_size": batch,
            "rng_seed": space.seed + trial,
        }))
    return configs


def _run_trial(trial: int, config: TrainConfig, train_set: TrajectoryDataset, val_set: TrajectoryDataset):
    result = train_classifier(train_set, config, validation=val_set)
    val_loss, val_auc = evaluate_loss(result.params, val_set)
    return trial, result.params, result.log, val_loss, val_auc


def split_dataset_by_accounts(
    dataset: TrajectoryDataset,
    fraction: float,
    rng_seed: int,
) -> Tuple[TrajectoryDataset, TrajectoryDataset]:
    label_map = {a: AccountClass.from_int(l) for a, l in zip(dataset.account_ids, dataset.labels)}
    train_ids, held_ids = stratified_holdout(label_map, fraction, rng_seed)
    return dataset.for_accounts(train_ids), dataset.for_accounts(held_ids)


def random_search(
    dataset: TrajectoryDataset,
    space: SearchSpace,
    base_config: Optional[TrainConfig] = None,
    n_jobs: int = 1,
) -> SearchResult:
    """
    Random hyper-parameter search ranked by validation AUC

    Args:
        dataset: Labeled trajectories, split by account into train/validation
        space: Search ranges, budget and seed
        base_config: Fixed settings (depth, epochs, patience)
        n_jobs: Trials trained in parallel

    Returns:
        SearchResult; ties go to the lowest trial index
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot search on an empty dataset")
    base = align_config(base_config or TrainConfig(), dataset)
    train_set, val_set = split_dataset_by_accounts(dataset, space.validation_fraction, space.seed)
    train_set = undersample(train_set, rng_seed=space.seed)
    if not 0 < val_set.n_positive < len(val_set):
        raise EmptyClassError("validation split needs trajectories of both classes")

    configs = sample_search_configs(space, base)
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_run_trial)(trial, cfg, train_set, val_set) for trial, cfg in enumerate(configs)
    )

    trials = []
    best = None
    for trial, params, log, val_loss, val_auc in sorted(outcomes, key=lambda o: o[0]):
        cfg = configs[trial]
        trials.append(TrialResult(
            trial=trial,
            hidden_width=cfg.hidden_sizes[0],
            dropout_rate=cfg.dropout_rate,
            learning_rate=cfg.learning_rate,
            batch_size=cfg.batch_size,
            val_auc=val_auc,
            val_loss=val_loss,
            best_epoch=log.best_epoch,
        ))
        if best is None or val_auc > best[1]:
            best = (trial, val_auc, params)
        logger.info(f"Trial {trial}: width={cfg.hidden_sizes[0]} lr={cfg.learning_rate:.2e} val_auc={val_auc:.4f}")

    return SearchResult(best_config=configs[best[0]], best_trial=best[0], trials=trials, best_params=best[2])


def training_log_frame(log: TrainingLog) -> pd.DataFrame:
    return pd.DataFrame(
        [r.model_dump() for r in log.epochs],
        columns=["epoch", "train_loss", "val_loss", "val_auc"],
    )


def write_training_log(log: TrainingLog, path: Path) -> Path:
    return write_frame(training_log_frame(log), path)


def trials_frame(trials: List[TrialResult]) -> pd.DataFrame:
    return pd.DataFrame([t.model_dump() for t in trials], columns=list(TrialResult.model_fields))


def write_trials(trials: List[TrialResult], path: Path) -> Path:
    return write_frame(trials_frame(trials), path)
