"""
trollscope command-line entry point
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd

from behavior_tools.ingest import (
    count_activities,
    filter_accounts,
    flatten_events,
    labels_by_account,
    read_events,
    read_labels,
    serialize_events,
)
from behavior_tools.sequence import build_sequences, export_sequences
from behavior_tools.synthgen import generate_dataset, write_corpus
from behavior_tools.trajectory import assemble_dataset, export_dataset
from config import APP_NAME, APP_VERSION, PRESETS, RunConfig, build_run_config
from evaluation.cluster import (
    cluster_report,
    indicator_features,
    indicator_matrix,
    kmeans,
    pca_project,
    write_cluster_report,
)
from evaluation.metrics import empirical_cdf, roc_curve, write_cdf, write_roc
from evaluation.score import (
    classify_accounts,
    evaluate_accounts,
    read_scores,
    score_accounts,
    sweep_threshold,
    write_scores,
    write_sweep,
)
from learning.gradcheck import grad_check, tiny_config
from learning.model_io import load_params, save_params
from learning.train import (
    align_config,
    random_search,
    split_dataset_by_accounts,
    train_classifier,
    undersample,
    write_training_log,
    write_trials,
)
from orchestrator.orchestrator import Orchestrator
from trollscope.exceptions import (
    InvariantViolationError,
    TrollScopeException,
    UsageError,
    ValidationError,
)
from trollscope.models import InputKind
from utils import ensure_dir, write_frame, write_manifest

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
GRADCHECK_TOLERANCE = 1e-4

SUBCOMMANDS = (
    "synth",
    "ingest",
    "sequences",
    "trajectories",
    "train",
    "gradcheck",
    "score",
    "sweep",
    "evaluate",
    "cluster",
    "cv",
    "baselines",
    "ablation",
)

# argparse destination -> dotted RunConfig key
FLAG_KEYS = {
    "events": "events",
    "labels": "labels",
    "model": "model",
    "scores": "scores",
    "out_dir": "out_dir",
    "seed": "seed",
    "threads": "threads",
    "window_length": "window_length",
    "input_kind": "input_kind",
    "min_active": "min_active",
    "min_passive": "min_passive",
    "folds": "folds",
    "split": "split",
    "sweep_step": "sweep_step",
    "objective": "sweep_objective",
    "sweep_accounts": "sweep_accounts",
    "threshold": "threshold",
    "decision_cutoff": "decision_cutoff",
    "cluster_k": "cluster_k",
    "epochs": "train.max_epochs",
    "patience": "train.early_stop_patience",
    "learning_rate": "train.learning_rate",
    "batch_size": "train.batch_size",
    "dropout": "train.dropout_rate",
    "budget": "search.budget",
    "n_accounts": "synth.n_accounts",
    "n_positive": "synth.n_positive",
    "n_negative": "synth.n_negative",
    "mixing": "synth.mixing",
    "positive_class": "synth.positive_class_name",
    "min_length": "synth.min_length",
    "max_length": "synth.max_length",
    "knn_k": "knn.k",
}


class CliParser(argparse.ArgumentParser):
    """Argument parser that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_set_options(pairs: Optional[Sequence[str]]) -> Dict[str, Any]:
    overrides = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects key=value, got '{pair}'")
        overrides[key.strip()] = _parse_value(value)
    return overrides


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file of flat dotted keys")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config key (repeatable)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="Start from a named settings preset")
    common.add_argument("--out-dir", dest="out_dir", type=Path, help="Directory for artifacts")
    common.add_argument("--seed", type=int, help="Master seed (env TROLLSCOPE_SEED)")
    common.add_argument("--threads", type=int, help="Worker cap for folds, trials and scoring")
    common.add_argument("-L", "--window-length", dest="window_length", type=int, help="Trajectory length")
    common.add_argument("--input-kind", dest="input_kind", choices=[k.value for k in InputKind])
    common.add_argument("--log-level", dest="log_level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    data = CliParser(add_help=False)
    data.add_argument("--events", type=Path, help="NDJSON event log")
    data.add_argument("--labels", type=Path, help="CSV account labels")
    data.add_argument("--min-active", dest="min_active", type=int)
    data.add_argument("--min-passive", dest="min_passive", type=int)

    training = CliParser(add_help=False)
    training.add_argument("--epochs", type=int)
    training.add_argument("--patience", type=int)
    training.add_argument("--learning-rate", dest="learning_rate", type=float)
    training.add_argument("--batch-size", dest="batch_size", type=int)
    training.add_argument("--dropout", type=float)

    protocol = CliParser(add_help=False)
    protocol.add_argument("--folds", type=int)
    protocol.add_argument("--split", choices=["account", "trajectory"])
    protocol.add_argument("--sweep-step", dest="sweep_step", type=float)
    protocol.add_argument("--objective", choices=["balanced_accuracy", "accuracy", "precision", "recall", "f1"])
    protocol.add_argument("--sweep-accounts", dest="sweep_accounts", type=int)
    protocol.add_argument("--threshold", type=float)
    protocol.add_argument("--decision-cutoff", dest="decision_cutoff", type=float)

    parser = CliParser(prog=APP_NAME, description="Behavioural troll detection from state-action trajectories")
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=CliParser)
    sub.required = True

    p = sub.add_parser("synth", parents=[common], help="Generate a labeled synthetic corpus")
    p.add_argument("--n-accounts", dest="n_accounts", type=int, help="Accounts per class")
    p.add_argument("--n-positive", dest="n_positive", type=int)
    p.add_argument("--n-negative", dest="n_negative", type=int)
    p.add_argument("--mixing", type=float, help="Class blend in [0, 1]; 1 removes all signal")
    p.add_argument("--positive-class", dest="positive_class", choices=["troll", "io_driver"])
    p.add_argument("--min-length", dest="min_length", type=int)
    p.add_argument("--max-length", dest="max_length", type=int)

    sub.add_parser("ingest", parents=[common, data], help="Validate and filter an event log")
    sub.add_parser("sequences", parents=[common, data], help="Export state-action sequences")
    sub.add_parser("trajectories", parents=[common, data], help="Export labeled non-overlapping trajectories")

    p = sub.add_parser("train", parents=[common, data, training], help="Train the trajectory classifier")
    p.add_argument("--search", action="store_true", help="Run random hyper-parameter search first")
    p.add_argument("--budget", type=int, help="Random search trial budget")

    p = sub.add_parser("gradcheck", parents=[common], help="Finite-difference gradient verification")
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--with-dropout", dest="with_dropout", type=float, default=0.0)

    p = sub.add_parser("score", parents=[common, data, protocol], help="Troll Scores of accounts")
    p.add_argument("--model", type=Path, required=True)

    p = sub.add_parser("sweep", parents=[common, protocol], help="Sweep the Troll Score threshold")
    p.add_argument("--scores", type=Path, required=True)

    p = sub.add_parser("evaluate", parents=[common, protocol], help="Evaluate classified Troll Scores")
    p.add_argument("--scores", type=Path, required=True)

    p = sub.add_parser("cluster", parents=[common, data], help="Behavioural clustering of accounts")
    p.add_argument("--scores", type=Path, help="Troll Scores to attach to the clusters")
    p.add_argument("--k", dest="cluster_k", type=int)

    sub.add_parser("cv", parents=[common, data, training, protocol], help="Full cross-validated protocol")

    p = sub.add_parser("baselines", parents=[common, data, training, protocol], help="LSTM vs logistic regression and KNN")
    p.add_argument("--knn-k", dest="knn_k", type=int)

    sub.add_parser("ablation", parents=[common, data, training, protocol], help="Window length and input kind ablation")
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, force=True)


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = parse_set_options(getattr(args, "set", None))
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = str(value) if isinstance(value, Path) else value
    return build_run_config(args.config, overrides, preset=args.preset)


def _require(path: Optional[Path], flag: str) -> Path:
    if path is None:
        raise UsageError(f"{flag} is required")
    if not Path(path).is_file():
        raise ValidationError(f"input file not found: {path}", field=flag)
    return Path(path)


def _load_sequences(run: RunConfig, need_labels: bool):
    events = filter_accounts(read_events(_require(run.events, "--events")), run.min_active, run.min_passive)
    labels = {}
    if need_labels or run.labels is not None:
        labels = labels_by_account(read_labels(_require(run.labels, "--labels")))
    return events, build_sequences(events), labels


def cmd_synth(run: RunConfig, args, out_dir: Path) -> List[Path]:
    corpus = generate_dataset(run.synth, n_jobs=run.threads)
    return list(write_corpus(corpus, out_dir).values())


def cmd_ingest(run: RunConfig, args, out_dir: Path) -> List[Path]:
    events, _, labels = _load_sequences(run, need_labels=False)
    events_path = out_dir / "events_filtered.jsonl"
    events_path.write_bytes(serialize_events(flatten_events(events)))
    rows = []
    for account_id, account_events in events.items():
        counts = count_activities(account_events)
        label = labels.get(account_id)
        rows.append((account_id, counts["active"], counts["passive"], label.value if label else ""))
    summary = pd.DataFrame(rows, columns=["account_id", "active", "passive", "label"])
    return [events_path, write_frame(summary, out_dir / "accounts.csv")]


def cmd_sequences(run: RunConfig, args, out_dir: Path) -> List[Path]:
    _, sequences, _ = _load_sequences(run, need_labels=False)
    return [export_sequences(sequences, out_dir / "sequences.csv")]


def cmd_trajectories(run: RunConfig, args, out_dir: Path) -> List[Path]:
    _, sequences, labels = _load_sequences(run, need_labels=True)
    dataset = assemble_dataset(sequences, labels, run.window_length, run.input_kind)
    return [export_dataset(dataset, out_dir / "trajectories.csv")]


def cmd_train(run: RunConfig, args, out_dir: Path) -> List[Path]:
    _, sequences, labels = _load_sequences(run, need_labels=True)
    dataset = assemble_dataset(sequences, labels, run.window_length, run.input_kind)
    outputs = []

    config = run.train
    if args.search:
        search = random_search(dataset, run.search, base_config=config, n_jobs=run.threads)
        outputs.append(write_trials(search.trials, out_dir / "trials.csv"))
        config = search.best_config

    train_ds, val_ds = split_dataset_by_accounts(dataset, run.validation_fraction, run.seed)
    train_ds = undersample(train_ds, rng_seed=run.seed)
    result = train_classifier(train_ds, align_config(config, train_ds), validation=val_ds)
    outputs.append(save_params(result.params, run.model or out_dir / "model.bin"))
    outputs.append(write_training_log(result.log, out_dir / "train_log.csv"))
    return outputs


def cmd_gradcheck(run: RunConfig, args, out_dir: Path) -> List[Path]:
    config = tiny_config(rng_seed=run.seed, dropout_rate=args.with_dropout)
    result = grad_check(config, batch_size=args.batch, seed=run.seed)
    path = out_dir / "gradcheck.json"
    path.write_text(result.model_dump_json(indent=2) + "\n", encoding="utf-8")
    print(f"max relative error: {result.max_rel_error:.3e}")
    if result.max_rel_error >= GRADCHECK_TOLERANCE:
        raise InvariantViolationError(
            f"gradient check failed: max relative error {result.max_rel_error:.3e} >= {GRADCHECK_TOLERANCE}"
        )
    return [path]


def cmd_score(run: RunConfig, args, out_dir: Path) -> List[Path]:
    _, sequences, labels = _load_sequences(run, need_labels=False)
    params = load_params(_require(run.model, "--model"))
    report = score_accounts(
        params,
        sequences,
        run.window_length,
        labels=labels,
        decision_cutoff=run.decision_cutoff,
        input_kind=run.input_kind,
        batch_size=run.score_batch_size,
        n_jobs=run.threads,
    )
    if run.threshold is not None:
        report = classify_accounts(report, run.threshold)
    outputs = [write_scores(report, out_dir / "troll_scores.csv")]
    if report.unscorable:
        unscorable = pd.DataFrame({"account_id": report.unscorable})
        outputs.append(write_frame(unscorable, out_dir / "unscorable.csv"))
    return outputs


def cmd_sweep(run: RunConfig, args, out_dir: Path) -> List[Path]:
    report = read_scores(_require(run.scores, "--scores"))
    choice = sweep_threshold(report, step=run.sweep_step, objective=run.sweep_objective)
    print(f"threshold: {choice.threshold:.2f} ({choice.objective}={choice.objective_value:.4f})")
    return [write_sweep(choice, out_dir / "sweep.csv")]


def cmd_evaluate(run: RunConfig, args, out_dir: Path) -> List[Path]:
    report = read_scores(_require(run.scores, "--scores")).labeled()
    threshold = run.threshold
    if threshold is None:
        threshold = sweep_threshold(report, step=run.sweep_step, objective=run.sweep_objective).threshold
    classified = classify_accounts(report, threshold)
    evaluation, binarized = evaluate_accounts(classified)

    row = {**evaluation.model_dump(exclude={"undefined"}), "undefined": ";".join(evaluation.undefined)}
    frame = pd.DataFrame([{**row, "binarized_auc": binarized, "threshold": threshold}])
    outputs = [write_frame(frame, out_dir / "eval_report.csv")]

    scores, truth = classified.scores(), classified.true_labels()
    outputs.append(write_roc(roc_curve(scores, truth), out_dir / "roc_account.csv"))
    outputs.append(write_cdf(empirical_cdf(scores[truth == 1]), out_dir / "cdf_positive.csv"))
    outputs.append(write_cdf(empirical_cdf(scores[truth == 0]), out_dir / "cdf_negative.csv"))
    return outputs


def cmd_cluster(run: RunConfig, args, out_dir: Path) -> List[Path]:
    _, sequences, labels = _load_sequences(run, need_labels=False)
    vectors = indicator_features(sequences)
    features = indicator_matrix(vectors)
    pca = pca_project(features, n_components=2)
    clusters = kmeans(pca.projections, k=run.cluster_k, rng_seed=run.seed)

    scores = {}
    if run.scores is not None:
        scores = {e.account_id: e.troll_score for e in read_scores(_require(run.scores, "--scores")).entries}

    report = cluster_report(
        [v.account_id for v in vectors],
        clusters.assignment,
        labels=labels,
        troll_scores=scores,
        projections=pca.projections,
        indicators=features,
        explained_variance=pca.explained_variance,
    )
    return list(write_cluster_report(report, out_dir).values())


def _labeled_inputs(run: RunConfig):
    orchestrator = Orchestrator(run)
    _require(run.events, "--events")
    _require(run.labels, "--labels")
    sequences, labels = orchestrator.load_inputs()
    return orchestrator, sequences, labels


def cmd_cv(run: RunConfig, args, out_dir: Path) -> List[Path]:
    orchestrator, sequences, labels = _labeled_inputs(run)
    result = orchestrator.run_cross_validation(sequences, labels, out_dir)
    print(
        f"trajectory AUC {result.trajectory.mean['auc']:.4f} ± {result.trajectory.std['auc']:.4f}; "
        f"account AUC {result.account.mean['auc']:.4f} ± {result.account.std['auc']:.4f}"
    )
    return list(result.outputs.values())


def cmd_baselines(run: RunConfig, args, out_dir: Path) -> List[Path]:
    orchestrator, sequences, labels = _labeled_inputs(run)
    reports = orchestrator.run_baseline_comparison(sequences, labels, out_dir)
    for model, report in reports.items():
        print(f"{model}: AUC {report.mean['auc']:.4f} ± {report.std['auc']:.4f}")
    return [out_dir / "baselines.csv"]


def cmd_ablation(run: RunConfig, args, out_dir: Path) -> List[Path]:
    orchestrator, sequences, labels = _labeled_inputs(run)
    orchestrator.run_ablation(sequences, labels, out_dir)
    return [out_dir / "ablation.csv"]


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace, Path], List[Path]]] = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "sequences": cmd_sequences,
    "trajectories": cmd_trajectories,
    "train": cmd_train,
    "gradcheck": cmd_gradcheck,
    "score": cmd_score,
    "sweep": cmd_sweep,
    "evaluate": cmd_evaluate,
    "cluster": cmd_cluster,
    "cv": cmd_cv,
    "baselines": cmd_baselines,
    "ablation": cmd_ablation,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Execute one subcommand

    Returns:
        0 on success, 1 on usage errors, 2 on data or validation errors,
        3 on internal invariant violations and unexpected failures
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e.message, file=sys.stderr)
        return e.exit_code
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)

    configure_logging(args.log_level)
    try:
        run_config = run_config_from_args(args)
        out_dir = ensure_dir(run_config.out_dir)
        outputs = COMMANDS[args.command](run_config, args, out_dir)
        inputs = [run_config.events, run_config.labels, run_config.model, run_config.scores, args.config]
        if args.command == "train":
            inputs = [run_config.events, run_config.labels, args.config]
        write_manifest(
            out_dir,
            args.command,
            run_config.model_dump(mode="json"),
            run_config.seed,
            inputs=inputs,
            outputs=outputs,
        )
        return 0
    except TrollScopeException as e:
        logger.error(f"{e.__class__.__name__}: {e.message}")
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"internal error: {e}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
