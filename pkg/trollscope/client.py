"""
Library facade over the trollscope pipeline
"""

import logging
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

from behavior_tools.ingest import filter_accounts, labels_by_account, read_events, read_labels
from behavior_tools.sequence import build_sequences
from behavior_tools.trajectory import assemble_dataset
from config import RunConfig
from evaluation.score import classify_accounts, score_accounts, sweep_threshold
from learning.lstm import LstmParams
from learning.model_io import load_params, save_params
from learning.train import TrainingResult, align_config, split_dataset_by_accounts, train_classifier, undersample
from orchestrator.orchestrator import CvResult, Orchestrator
from trollscope.exceptions import ValidationError
from trollscope.models import AccountClass, AccountSequence, ThresholdChoice, TrollScoreReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class TrollScopeClient:
    """
    In-process client for the detection pipeline

    Example:
        >>> client = TrollScopeClient(RunConfig(window_length=100))
        >>> sequences, labels = client.load("events.jsonl", "labels.csv")
        >>> client.train(sequences, labels)
        >>> scores = client.score(sequences, labels=labels)
        >>> choice = client.calibrate(scores)
        >>> classified = client.classify(scores, choice.threshold)
    """

    def __init__(self, run: Optional[RunConfig] = None, params: Optional[LstmParams] = None):
        """
        Initialize the client

        Args:
            run: Run configuration; defaults everywhere when omitted
            params: Already trained classifier
        """
        self.run = run or RunConfig()
        self.params = params
        self.last_training: Optional[TrainingResult] = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        return False

    def load(self, events: PathLike, labels: Optional[PathLike] = None) -> Tuple[Dict[str, AccountSequence], Dict[str, AccountClass]]:
        """Read events (and labels), apply the activity filter and compile sequences"""
        grouped = filter_accounts(read_events(Path(events)), self.run.min_active, self.run.min_passive)
        sequences = build_sequences(grouped)
        label_map = labels_by_account(read_labels(Path(labels))) if labels is not None else {}
        return sequences, label_map

    def train(
        self,
        sequences: Mapping[str, AccountSequence],
        labels: Mapping[str, AccountClass],
    ) -> LstmParams:
        """
        Train on all labeled accounts, holding out a stratified share for early stopping

        Returns:
            The trained parameters, also kept on the client
        """
        dataset = assemble_dataset(dict(sequences), dict(labels), self.run.window_length, self.run.input_kind)
        train_ds, val_ds = split_dataset_by_accounts(dataset, self.run.validation_fraction, self.run.seed)
        train_ds = undersample(train_ds, rng_seed=self.run.seed)
        config = align_config(self.run.train, train_ds, rng_seed=self.run.seed)
        self.last_training = train_classifier(train_ds, config, validation=val_ds)
        self.params = self.last_training.params
        return self.params

    def _require_params(self) -> LstmParams:
        if self.params is None:
            raise ValidationError("no trained model: call train() or load_model() first", field="model")
        return self.params

    def score(
        self,
        sequences: Mapping[str, AccountSequence],
        labels: Optional[Mapping[str, AccountClass]] = None,
    ) -> TrollScoreReport:
        """Troll Score of every account long enough to score"""
        return score_accounts(
            self._require_params(),
            sequences,
            self.run.window_length,
            labels=labels,
            decision_cutoff=self.run.decision_cutoff,
            input_kind=self.run.input_kind,
            batch_size=self.run.score_batch_size,
            n_jobs=self.run.threads,
        )

    def calibrate(self, report: TrollScoreReport) -> ThresholdChoice:
        return sweep_threshold(report, step=self.run.sweep_step, objective=self.run.sweep_objective)

    def classify(self, report: TrollScoreReport, threshold: Optional[float] = None) -> TrollScoreReport:
        threshold = self.run.threshold if threshold is None else threshold
        if threshold is None:
            raise ValidationError("no threshold given and none configured", field="threshold")
        return classify_accounts(report, threshold)

    def cross_validate(
        self,
        sequences: Mapping[str, AccountSequence],
        labels: Mapping[str, AccountClass],
        out_dir: Optional[PathLike] = None,
    ) -> CvResult:
        return Orchestrator(self.run).run_cross_validation(dict(sequences), dict(labels), out_dir)

    def save_model(self, path: PathLike) -> Path:
        return save_params(self._require_params(), path)

    def load_model(self, path: PathLike) -> LstmParams:
        self.params = load_params(path)
        return self.params
