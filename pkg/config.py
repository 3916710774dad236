"""
Configuration management for trollscope
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from trollscope.exceptions import ConfigError
from trollscope.models import InputKind


APP_NAME = "trollscope"
APP_VERSION = "0.1.0"


class Settings(BaseSettings):
    """Environment settings; only the seed may come from the environment"""

    SEED: Optional[int] = None

    model_config = SettingsConfigDict(
        env_prefix="TROLLSCOPE_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )


# Create global settings instance
settings = Settings()


class TrainConfig(BaseModel):
    """Hyper-parameters of the recurrent trajectory classifier"""
    model_config = ConfigDict(extra="forbid")

    window_length: int = Field(200, ge=1, description="Trajectory length L")
    input_size: int = Field(11, ge=1, description="Alphabet size fed as one-hot")
    hidden_sizes: Tuple[int, ...] = (64, 64, 64, 64)
    dropout_rate: float = Field(0.2, ge=0.0, lt=1.0)
    all_sigmoid_cell: bool = False
    learning_rate: float = Field(1e-3, gt=0.0)
    beta1: float = Field(0.9, gt=0.0, lt=1.0)
    beta2: float = Field(0.999, gt=0.0, lt=1.0)
    epsilon: float = Field(1e-8, gt=0.0)
    batch_size: int = Field(64, ge=1)
    max_epochs: int = Field(30, ge=0)
    early_stop_patience: int = Field(5, ge=0)
    grad_clip_norm: float = Field(5.0, gt=0.0)
    rng_seed: int = 0

    @field_validator("hidden_sizes")
    @classmethod
    def check_hidden_sizes(cls, v):
        if len(v) == 0 or any(h < 1 for h in v):
            raise ValueError("hidden_sizes must be a non-empty tuple of positive integers")
        return tuple(int(h) for h in v)


class SearchSpace(BaseModel):
    """Random hyper-parameter search ranges"""
    model_config = ConfigDict(extra="forbid")

    hidden_widths: Tuple[int, ...] = (16, 32, 64, 128)
    dropout_range: Tuple[float, float] = (0.1, 0.5)
    learning_rate_range: Tuple[float, float] = (1e-4, 1e-2)
    batch_sizes: Tuple[int, ...] = (32, 64, 128)
    budget: int = Field(10, ge=1)
    seed: int = 0
    validation_fraction: float = Field(0.1, gt=0.0, lt=1.0)


class SynthConfig(BaseModel):
    """Synthetic corpus generation settings"""
    model_config = ConfigDict(extra="forbid")

    n_accounts: int = Field(200, ge=0, description="Accounts per class")
    n_positive: Optional[int] = Field(None, ge=0)
    n_negative: Optional[int] = Field(None, ge=0)
    positive_archetype: str = "troll"
    negative_archetype: str = "user"
    mixing: float = Field(0.0, ge=0.0, le=1.0, description="Difficulty dial lambda")
    min_length: Optional[int] = Field(None, ge=1)
    max_length: Optional[int] = Field(None, ge=1)
    positive_class_name: str = "troll"
    rng_seed: int = 0

    @field_validator("positive_class_name")
    @classmethod
    def check_positive_name(cls, v):
        if v not in ("troll", "io_driver"):
            raise ValueError("positive_class_name must be 'troll' or 'io_driver'")
        return v

    @property
    def positive_count(self) -> int:
        return self.n_accounts if self.n_positive is None else self.n_positive

    @property
    def negative_count(self) -> int:
        return self.n_accounts if self.n_negative is None else self.n_negative


class LogRegConfig(BaseModel):
    """Full-batch logistic regression baseline"""
    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(0.5, gt=0.0)
    epochs: int = Field(200, ge=0)
    rng_seed: int = 0


class KnnConfig(BaseModel):
    """k-nearest-neighbour baseline over Hamming distance"""
    model_config = ConfigDict(extra="forbid")

    k: int = Field(5, ge=1)

    @field_validator("k")
    @classmethod
    def check_odd(cls, v):
        if v % 2 == 0:
            raise ValueError("k must be odd")
        return v


class RunConfig(BaseModel):
    """Everything a command-line run needs"""
    model_config = ConfigDict(extra="forbid")

    events: Optional[Path] = None
    labels: Optional[Path] = None
    model: Optional[Path] = None
    scores: Optional[Path] = None
    out_dir: Path = Path("./outputs")

    window_length: int = Field(200, ge=1)
    input_kind: InputKind = InputKind.STATE_ACTION
    min_active: int = Field(10, ge=0)
    min_passive: int = Field(10, ge=0)

    train: TrainConfig = Field(default_factory=TrainConfig)
    search: SearchSpace = Field(default_factory=SearchSpace)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    logreg: LogRegConfig = Field(default_factory=LogRegConfig)
    knn: KnnConfig = Field(default_factory=KnnConfig)

    folds: int = Field(10, ge=2)
    split: str = "account"
    sweep_step: float = Field(0.02, gt=0.0, le=1.0)
    sweep_objective: str = "balanced_accuracy"
    sweep_accounts: Optional[int] = Field(None, ge=1, description="Training accounts per class used for the sweep")
    decision_cutoff: float = Field(0.5, ge=0.0, le=1.0)
    threshold: Optional[float] = Field(None, ge=0.0, le=1.0)
    validation_fraction: float = Field(0.1, gt=0.0, lt=1.0)
    cluster_k: int = Field(3, ge=1)
    ablation_lengths: List[int] = Field(default_factory=lambda: [50, 100, 150, 200])
    score_batch_size: int = Field(512, ge=1)

    seed: int = 0
    threads: int = Field(1, ge=1)

    @field_validator("split")
    @classmethod
    def check_split(cls, v):
        if v not in ("account", "trajectory"):
            raise ValueError("split must be 'account' or 'trajectory'")
        return v

    @field_validator("sweep_objective")
    @classmethod
    def check_objective(cls, v):
        if v not in ("balanced_accuracy", "accuracy", "precision", "recall", "f1"):
            raise ValueError(f"unknown sweep objective '{v}'")
        return v

    @model_validator(mode="after")
    def sync_train_config(self):
        # The run-level L and alphabet are the source of truth for the classifier.
        self.train.window_length = self.window_length
        self.train.input_size = self.input_kind.alphabet_size
        # nested seeds follow the run seed unless set explicitly
        for sub, name in ((self.train, "rng_seed"), (self.synth, "rng_seed"), (self.logreg, "rng_seed"), (self.search, "seed")):
            if name not in sub.model_fields_set:
                setattr(sub, name, self.seed)
        return self


# Desk-scale settings for the end-to-end synthetic benchmark.
PRESETS: Dict[str, Dict[str, Any]] = {
    "benchmark": {
        "window_length": 100,
        "train.hidden_sizes": [16, 16, 16, 16],
        "train.max_epochs": 10,
        "train.early_stop_patience": 3,
        "sweep_accounts": 20,
    },
}


def unflatten_dotted(flat: Dict[str, Any]) -> Dict[str, Any]:
    """Turn {"train.learning_rate": x} into {"train": {"learning_rate": x}}"""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            existing = node.setdefault(part, {})
            if not isinstance(existing, dict):
                raise ConfigError(f"config key '{key}' conflicts with a scalar value")
            node = existing
        node[parts[-1]] = value
    return nested


def merge_nested(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_nested(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a JSON config of flat dotted keys"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return unflatten_dotted(raw)


def build_run_config(
    config_path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
    env: Optional[Settings] = None,
    preset: Optional[str] = None,
) -> RunConfig:
    """
    Assemble a RunConfig with precedence
    defaults < preset < file < environment seed < flags

    Args:
        preset: Name of an entry in PRESETS
        config_path: Optional JSON file of flat dotted keys
        overrides: Flat dotted keys from the command line
        env: Environment settings; the module-level `settings` when omitted

    Returns:
        Validated RunConfig
    """
    data: Dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}'; available: {sorted(PRESETS)}")
        data = unflatten_dotted(PRESETS[preset])
    if config_path is not None:
        data = merge_nested(data, load_config_file(config_path))

    env = env if env is not None else settings
    if env.SEED is not None:
        data["seed"] = env.SEED

    if overrides:
        data = merge_nested(data, unflatten_dotted(overrides))

    try:
        return RunConfig.model_validate(data)
    except PydanticValidationError as e:
        raise ConfigError(f"invalid configuration: {e}")
