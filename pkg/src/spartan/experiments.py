"""Scaled-down experiments shared by ``scripts/`` and the acceptance suite.

* :func:`exploration_sweep` compares mask churn of dual averaging, Spartan
  and IMP on planted sparse regression.
* :func:`flop_sensitivity` compares the cost-weighted valuations
  ``c * |theta|`` and ``sqrt(c) * |theta|`` at equal cost budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .analysis import MaskArchive, window_median
from .data import DatasetSpec, load_dataset
from .masking import PruningGroupSpec
from .models import ModelSpec
from .schedules import TrainingSchedule
from .trainer import OptimizerConfig, TrainResult, support_f1, train

__all__ = [
    "ExplorationConfig",
    "ExplorationResult",
    "exploration_sweep",
    "FlopConfig",
    "FlopResult",
    "flop_sensitivity",
    "SWEEP_RUNS",
]

# (label, rule, beta_max); dual averaging ignores beta, listed as 0 for clarity
SWEEP_RUNS = (("dual_averaging", "dual_averaging", 0.0), ("spartan", "spartan", 10.0), ("imp", "imp", 0.0))


@dataclass(frozen=True)
class ExplorationConfig:
    dim: int = 400
    true_support_size: int = 40
    n_samples: int = 300
    noise_std: float = 1.0
    target_sparsity: float = 0.9
    epochs: int = 50
    seeds: tuple[int, ...] = (0, 1, 2)
    window: tuple[int, int] = (10, 40)
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(lr=0.01, batch_size=16))


@dataclass
class ExplorationResult:
    # label -> per-seed median of consecutive-epoch mask correlation over the window
    run_medians: dict[str, list[float]]
    # label -> per-seed F1 of the final support against the planted support
    f1: dict[str, list[float]]
    results: dict[tuple[str, int], TrainResult]

    @property
    def medians(self) -> dict[str, float]:
        return {k: float(np.median(v)) for k, v in self.run_medians.items()}


def exploration_sweep(cfg: ExplorationConfig = ExplorationConfig(),
                      runs: Sequence[tuple[str, str, float]] = SWEEP_RUNS) -> ExplorationResult:
    model = ModelSpec("linear_regression", cfg.dim)
    run_medians: dict[str, list[float]] = {label: [] for label, _, _ in runs}
    f1: dict[str, list[float]] = {label: [] for label, _, _ in runs}
    results = {}
    lo, hi = cfg.window
    for seed in cfg.seeds:
        data = load_dataset(DatasetSpec("planted_sparse_regression", n_samples=cfg.n_samples, dim=cfg.dim,
                                        true_support_size=cfg.true_support_size, noise_std=cfg.noise_std, seed=seed))
        for label, rule, beta_max in runs:
            sched = TrainingSchedule(cfg.epochs, cfg.target_sparsity, beta_max=beta_max,
                                     beta_start=min(1.0, beta_max))
            res = train(model, data, rule, sched, cfg.optimizer, seed=seed)
            archive = MaskArchive(res.units.n_units, res.masks, [r.epoch for r in res.metrics])
            run_medians[label].append(window_median(archive, lo, hi))
            f1[label].append(support_f1(res.masks[-1], data.true_support))
            results[(label, seed)] = res
    return ExplorationResult(run_medians, f1, results)


@dataclass(frozen=True)
class FlopConfig:
    """Two-layer MLP where first-layer weights cost ``expensive_cost`` per entry."""

    input_dim: int = 16
    hidden_dim: int = 32
    classes: int = 4
    n_samples: int = 600
    separation: float = 4.0
    expensive_cost: float = 4.0
    cheap_cost: float = 1.0
    target_sparsity: float = 0.9
    beta_max: float = 10.0
    epochs: int = 20
    seeds: tuple[int, ...] = (0, 1, 2)
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(lr=0.05))


@dataclass
class FlopResult:
    # valuation exponent -> per-seed final realized sparsity / support cost / kept entries per tensor
    sparsity: dict[float, list[float]]
    support_cost: dict[float, list[float]]
    kept: dict[float, list[Mapping[str, int]]]
    budget: float


def flop_sensitivity(cfg: FlopConfig = FlopConfig(), exponents: Sequence[float] = (1.0, 0.5)) -> FlopResult:
    data = load_dataset(DatasetSpec("gaussian_mixture_classification", n_samples=cfg.n_samples, dim=cfg.input_dim,
                                    classes=cfg.classes, separation=cfg.separation, seed=0))
    spec = ModelSpec("mlp_1hidden", cfg.input_dim, cfg.classes, hidden_dim=cfg.hidden_dim)
    costs = {"fc1.weight": cfg.expensive_cost, "fc2.weight": cfg.cheap_cost}
    sched = TrainingSchedule(cfg.epochs, cfg.target_sparsity, beta_max=cfg.beta_max)
    sparsity: dict[float, list[float]] = {}
    support_cost: dict[float, list[float]] = {}
    kept: dict[float, list[Mapping[str, int]]] = {}
    budget: Optional[float] = None
    for p in exponents:
        group = PruningGroupSpec(entry_cost=costs, valuation_exponent=p)
        for seed in cfg.seeds:
            res = train(spec, data, "spartan", sched, cfg.optimizer, group=group, seed=seed)
            last = res.metrics[-1]
            budget = last.keep_fraction * res.units.total_cost
            names = np.asarray(res.units.tensor_of_unit)[res.masks[-1]]
            sparsity.setdefault(p, []).append(last.sparsity)
            support_cost.setdefault(p, []).append(last.support_cost)
            kept.setdefault(p, []).append({n: int(np.sum(names == n)) for n in costs})
    return FlopResult(sparsity, support_cost, kept, float(budget))
