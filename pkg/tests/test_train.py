import numpy as np
import pandas as pd
import pytest

from behavior_tools.trajectory import assemble_dataset
from config import SearchSpace, TrainConfig
from learning.lstm import init_params, mean_bce, predict_proba
from learning.train import (
    align_config,
    random_search,
    sample_search_configs,
    split_dataset_by_accounts,
    stratified_holdout,
    stratified_kfold,
    stratified_kfold_indices,
    train_classifier,
    undersample,
    write_training_log,
)
from trollscope.exceptions import (
    EmptyClassError,
    EmptyDatasetError,
    InsufficientClassMembersError,
    LengthMismatchError,
)
from trollscope.models import AccountClass, TrajectoryDataset


@pytest.fixture
def dataset(small_corpus):
    sequences, labels = small_corpus
    return assemble_dataset(sequences, labels, 10)


@pytest.mark.parametrize("n_pos,n_neg,k", [(10, 10, 5), (7, 23, 3), (13, 4, 4), (50, 51, 10)])
def test_kfold_is_stratified_and_balanced(n_pos, n_neg, k):
    labels = [1] * n_pos + [0] * n_neg
    folds = stratified_kfold_indices(labels, k, rng_seed=3)
    assert set(folds.tolist()) == set(range(k))
    sizes = np.bincount(folds, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    for cls in (0, 1):
        per_class = np.bincount(folds[np.asarray(labels) == cls], minlength=k)
        assert per_class.max() - per_class.min() <= 1


def test_kfold_needs_k_members_per_class():
    with pytest.raises(InsufficientClassMembersError):
        stratified_kfold_indices([1, 1, 0, 0, 0], 3)


def test_fold_plan_partitions_accounts():
    labels = {f"a{i}": AccountClass.from_int(i % 3 == 0) for i in range(30)}
    plan = stratified_kfold(labels, 5, rng_seed=1)
    tested = [a for fold in range(5) for a in plan.test_accounts(fold)]
    assert sorted(tested) == sorted(labels)
    for fold in range(5):
        assert not set(plan.test_accounts(fold)) & set(plan.train_accounts(fold))
    assert plan == stratified_kfold(labels, 5, rng_seed=1)


def test_undersample_balances_and_keeps_minority(dataset):
    skewed = dataset.subset(np.r_[np.flatnonzero(dataset.labels == 1)[:10], np.flatnonzero(dataset.labels == 0)])
    balanced = undersample(skewed, rng_seed=0)
    assert balanced.n_positive == balanced.n_negative == 10
    kept_pos = [(a, o) for a, o, l in zip(balanced.account_ids, balanced.offsets, balanced.labels) if l == 1]
    all_pos = [(a, o) for a, o, l in zip(skewed.account_ids, skewed.offsets, skewed.labels) if l == 1]
    assert kept_pos == all_pos


def test_undersample_needs_both_classes(dataset):
    with pytest.raises(EmptyClassError):
        undersample(dataset.subset(np.flatnonzero(dataset.labels == 1)))


def test_stratified_holdout():
    labels = {f"p{i}": AccountClass.POSITIVE for i in range(10)}
    labels.update({f"n{i}": AccountClass.NEGATIVE for i in range(20)})
    train, held = stratified_holdout(labels, 0.1, rng_seed=0)
    assert sum(a.startswith("p") for a in held) == 1
    assert sum(a.startswith("n") for a in held) == 2
    assert sorted(train + held) == sorted(labels)


def test_training_is_deterministic(dataset, tiny_train_config):
    config = align_config(tiny_train_config, dataset, dropout_rate=0.2)
    a = train_classifier(dataset, config)
    b = train_classifier(dataset, config)
    for name in a.params.tensors:
        np.testing.assert_array_equal(a.params.tensors[name], b.params.tensors[name])
    assert [e.train_loss for e in a.log.epochs] == [e.train_loss for e in b.log.epochs]


def test_early_stopping_bookkeeping(dataset, tiny_train_config):
    train_ds, val_ds = split_dataset_by_accounts(dataset, 0.25, rng_seed=0)
    config = align_config(tiny_train_config, dataset, max_epochs=6, early_stop_patience=0, learning_rate=0.05)
    result = train_classifier(train_ds, config, validation=val_ds)
    log = result.log
    assert 1 <= log.best_epoch <= len(log.epochs) <= 6
    assert [e.epoch for e in log.epochs] == list(range(1, len(log.epochs) + 1))
    if log.stopped_early:
        assert len(log.epochs) == log.best_epoch + 1
    best_val = min(e.val_loss for e in log.epochs)
    assert log.epochs[log.best_epoch - 1].val_loss == best_val


def test_zero_epochs_returns_initial_params(dataset, tiny_train_config):
    result = train_classifier(dataset, align_config(tiny_train_config, dataset, max_epochs=0))
    assert result.log.epochs == []
    assert result.params.tensors["dense.b"][0] == 0.0


def test_train_rejects_mismatched_config(dataset, tiny_train_config):
    with pytest.raises(LengthMismatchError):
        train_classifier(dataset, tiny_train_config.model_copy(update={"window_length": 7}))
    with pytest.raises(EmptyDatasetError):
        train_classifier(dataset.subset([]), tiny_train_config)


def test_training_log_csv(tmp_path, dataset, tiny_train_config):
    result = train_classifier(dataset, align_config(tiny_train_config, dataset, max_epochs=2))
    frame = pd.read_csv(write_training_log(result.log, tmp_path / "log.csv"))
    assert frame["epoch"].tolist() == [1, 2]


def test_search_configs_are_prefix_stable():
    base = TrainConfig(hidden_sizes=(8, 8))
    short = sample_search_configs(SearchSpace(budget=3, seed=4), base)
    long = sample_search_configs(SearchSpace(budget=6, seed=4), base)
    assert short == long[:3]
    assert [c.rng_seed for c in long] == [4, 5, 6, 7, 8, 9]
    assert all(len(c.hidden_sizes) == 2 and c.hidden_sizes[0] == c.hidden_sizes[1] for c in long)
    assert all(1e-4 * (1 - 1e-9) <= c.learning_rate <= 1e-2 * (1 + 1e-9) for c in long)


def test_random_search_picks_best_validation_auc(dataset, tiny_train_config):
    space = SearchSpace(budget=3, seed=0, hidden_widths=(4, 6), batch_sizes=(32,), validation_fraction=0.25)
    result = random_search(dataset, space, base_config=tiny_train_config.model_copy(update={"max_epochs": 2}))
    assert len(result.trials) == 3
    aucs = [t.val_auc for t in result.trials]
    assert result.best_trial == int(np.argmax(aucs))
    assert result.best_config.hidden_sizes[0] == result.trials[result.best_trial].hidden_width


def separable_toy(n, window_length, seed):
    """Positives draw codes from {0, 1, 3, 4}, negatives from {6, 7, 9, 10}"""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    alphabets = {1: np.array([0, 1, 3, 4]), 0: np.array([6, 7, 9, 10])}
    codes = np.stack([rng.choice(alphabets[int(y)], size=window_length) for y in labels])
    return TrajectoryDataset(
        window_length=window_length,
        codes=codes.astype(np.int64),
        account_ids=[f"toy_{i}" for i in range(n)],
        offsets=np.zeros(n, dtype=np.int64),
        labels=labels.astype(np.int64),
    )


def toy_config(**overrides):
    base = dict(window_length=8, hidden_sizes=(8,), dropout_rate=0.0, learning_rate=0.02,
                batch_size=10, early_stop_patience=30, rng_seed=0)
    base.update(overrides)
    return TrainConfig(**base)


def test_loss_falls_tenfold_on_separable_toy_set():
    data = separable_toy(50, 8, seed=0)
    config = toy_config(max_epochs=20)
    initial = mean_bce(predict_proba(init_params(config, rng_seed=config.rng_seed), data.codes), data.labels)
    result = train_classifier(data, config)
    final = mean_bce(predict_proba(result.params, data.codes), data.labels)
    assert final < 0.1 * initial


def test_separable_toy_set_validates_above_95_percent():
    train, validation = separable_toy(50, 8, seed=1), separable_toy(40, 8, seed=2)
    result = train_classifier(train, toy_config(max_epochs=30), validation=validation)
    predicted = predict_proba(result.params, validation.codes) >= 0.5
    assert np.mean(predicted == validation.labels) >= 0.95
