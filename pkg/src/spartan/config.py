"""Experiment configuration files.

The format is INI (``configparser``) with these sections, all optional
except ``[dataset]``. Unknown sections or keys are rejected, and every
value is type-checked before any compute runs.

.. code-block:: ini

    [run]
    seed = 0
    output_dir = runs/spartan      ; default: $SPARTAN_OUTPUT_DIR, else ./runs

    [model]
    architecture = linear_regression   ; logistic_regression | mlp_1hidden
    hidden_dim = 32
    loss = mse                          ; mse | cross_entropy (default by architecture)
    ; input_dim / output_dim default to the dataset's shape

    [dataset]
    source = planted_sparse_regression  ; gaussian_mixture_classification | csv_file
    n_samples = 300
    dim = 400
    true_support_size = 40
    noise_std = 1.0
    classes = 2
    separation = 2.0
    path = data.csv                     ; csv_file only
    label_column = y                    ; csv_file only
    eval_fraction = 0.2
    seed = 0

    [rule]
    name = spartan                      ; imp | dual_averaging | spartan

    [schedule]
    total_epochs = 50
    target_sparsity = 0.9
    beta_start = 1.0
    beta_max = 10.0
    warmup_frac = 0.2
    intermediate_end_frac = 0.8

    [sinkhorn]
    max_iterations = 100
    tolerance = 0.01
    init_strategy = sorted_threshold    ; cold | dual_cache | sorted_threshold

    [group]
    layout = per_entry                  ; per_entry | blocks
    block_size = 1
    excluded_tensors = fc2.weight, fc2.bias
    prune_biases = false
    valuation_exponent = 0.0

    [group.entry_cost]
    fc1.weight = 4.0

    [optimizer]
    lr = 0.01
    momentum = 0.9
    nesterov = true
    weight_decay = 0.0
    batch_size = 32

Values can be overridden with ``section.key=value`` strings, e.g.
``schedule.beta_max=0`` or ``group.entry_cost.fc1.weight=2``.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .data import DatasetSpec
from .masking import PruningGroupSpec
from .models import ModelSpec
from .ot_topk import SinkhornConfig
from .schedules import TrainingSchedule
from .trainer import OptimizerConfig
from .updates import RULES

__all__ = ["ConfigError", "ModelConfig", "ExperimentConfig", "load_config", "parse_config", "OUTPUT_DIR_ENV"]

OUTPUT_DIR_ENV = "SPARTAN_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _names(s: str) -> frozenset:
    return frozenset(x.strip() for x in s.split(",") if x.strip())


def _opt_str(s: str) -> Optional[str]:
    return s.strip() or None


_SCHEMA: dict[str, dict[str, Callable[[str], object]]] = {
    "run": {"seed": int, "output_dir": str},
    "model": {"architecture": str, "input_dim": int, "output_dim": int, "hidden_dim": int, "loss": _opt_str},
    "dataset": {
        "source": str, "n_samples": int, "dim": int, "true_support_size": int, "noise_std": float,
        "classes": int, "separation": float, "path": str, "label_column": str, "eval_fraction": float,
        "seed": int,
    },
    "rule": {"name": str},
    "schedule": {
        "total_epochs": int, "target_sparsity": float, "beta_start": float, "beta_max": float,
        "warmup_frac": float, "intermediate_end_frac": float,
    },
    "sinkhorn": {"max_iterations": int, "tolerance": float, "init_strategy": str},
    "group": {
        "layout": str, "block_size": int, "excluded_tensors": _names, "prune_biases": _bool,
        "valuation_exponent": float,
    },
    "group.entry_cost": {},  # free-form tensor names -> float
    "optimizer": {"lr": float, "momentum": float, "nesterov": _bool, "weight_decay": float, "batch_size": int},
}


@dataclass(frozen=True)
class ModelConfig:
    """Model fields; missing dimensions are filled from the dataset."""

    architecture: str = "linear_regression"
    input_dim: Optional[int] = None
    output_dim: Optional[int] = None
    hidden_dim: int = 32
    loss: Optional[str] = None

    def resolve(self, input_dim: int, n_classes: Optional[int]) -> ModelSpec:
        loss = self.loss or ModelSpec(self.architecture, 1, 2).resolved_loss
        default_out = n_classes if (loss == "cross_entropy" and n_classes) else 1
        return ModelSpec(self.architecture, self.input_dim or input_dim, self.output_dim or default_out,
                         self.hidden_dim, self.loss)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec
    model: ModelConfig = field(default_factory=ModelConfig)
    rule: str = "spartan"
    schedule: TrainingSchedule = field(default_factory=lambda: TrainingSchedule(50))
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    group: PruningGroupSpec = field(default_factory=PruningGroupSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0
    output_dir: str = "runs"

    @property
    def task(self) -> str:
        loss = self.model.loss or ModelSpec(self.model.architecture, 1, 2).resolved_loss
        return "classification" if loss == "cross_entropy" else "regression"


def _typed(parser: configparser.ConfigParser) -> dict[str, dict[str, object]]:
    out: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        schema = _SCHEMA[section]
        values = {}
        for key, raw in parser.items(section):
            conv = float if section == "group.entry_cost" else schema.get(key)
            if conv is None:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                values[key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
        out[section] = values
    return out


def _apply_overrides(parser: configparser.ConfigParser, overrides: Sequence[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, value = item.split("=", 1)
        lhs = lhs.strip()
        section = next((s for s in sorted(_SCHEMA, key=len, reverse=True) if lhs.startswith(s + ".")), None)
        if section is None:
            raise ConfigError(f"override {item!r}: unknown section")
        key = lhs[len(section) + 1:]
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value.strip())


def parse_config(text: str, overrides: Sequence[str] = (), base_dir: Optional[Path] = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str  # tensor names are case sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    _apply_overrides(parser, overrides)
    v = _typed(parser)
    if "dataset" not in v:
        raise ConfigError("missing [dataset] section")
    try:
        ds = dict(v["dataset"])
        if "path" in ds and base_dir is not None and not os.path.isabs(ds["path"]):
            ds["path"] = str(base_dir / ds["path"])
        dataset = DatasetSpec(**ds)
        if dataset.source == "csv_file" and not os.path.isfile(dataset.path):
            raise ConfigError(f"dataset file not found: {dataset.path}")
        model = ModelConfig(**v.get("model", {}))
        model.resolve(2, 2)  # validates architecture and loss
        rule = v.get("rule", {}).get("name", "spartan")
        if rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {rule!r}")
        sched = dict(v.get("schedule", {}))
        schedule = TrainingSchedule(sched.pop("total_epochs", 50), **sched)
        sinkhorn = SinkhornConfig(**v.get("sinkhorn", {}))
        group = PruningGroupSpec(entry_cost=dict(v.get("group.entry_cost", {})), **v.get("group", {}))
        optimizer = OptimizerConfig(**v.get("optimizer", {}))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    run = v.get("run", {})
    output_dir = run.get("output_dir") or os.environ.get(OUTPUT_DIR_ENV) or "runs"
    return ExperimentConfig(dataset, model, rule, schedule, sinkhorn, group, optimizer,
                            int(run.get("seed", 0)), str(output_dir))


def load_config(path: os.PathLike | str, overrides: Sequence[str] = ()) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, overrides, base_dir=path.parent)
