"""Training loop wiring update rules, schedules, models and metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .data import Dataset
from .masking import PruningGroupSpec, UnitMap
from .models import Model, ModelSpec
from .ot_topk import HardMask, SinkhornConfig
from .schedules import FINE_TUNE, TrainingSchedule
from .updates import UpdateRuleState, rule_direction, rule_forward

__all__ = [
    "OptimizerConfig",
    "MetricsRow",
    "METRICS_COLUMNS",
    "TrainResult",
    "TrainingDiverged",
    "UndefinedCorrelationError",
    "mask_pearson",
    "support_f1",
    "train",
]


class TrainingDiverged(RuntimeError):
    """Non-finite loss or parameters; carries the last finite state."""

    def __init__(self, epoch: int, step: int, params: np.ndarray, metrics: list):
        super().__init__(f"training diverged at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step
        self.params = params
        self.metrics = metrics


class UndefinedCorrelationError(ValueError):
    """Pearson correlation of a constant indicator."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Mini-batch SGD; momentum and weight decay act on the dense parameters."""

    lr: float = 0.01
    momentum: float = 0.9
    nesterov: bool = True
    weight_decay: float = 0.0
    batch_size: int = 32

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def apply(self, theta: np.ndarray, direction: np.ndarray, velocity: np.ndarray) -> np.ndarray:
        """PyTorch-style SGD step; updates ``velocity`` in place."""
        g = direction + self.weight_decay * theta if self.weight_decay else direction
        if self.momentum == 0.0:
            return theta - self.lr * g
        velocity *= self.momentum
        velocity += g
        if self.nesterov:
            g = g + self.momentum * velocity
        else:
            g = velocity
        return theta - self.lr * g


@dataclass
class MetricsRow:
    epoch: int
    phase: str
    keep_fraction: float
    beta: float
    train_loss: float
    eval_metric: float
    sparsity: float
    support_cost: float
    support_size: int
    sinkhorn_iters_mean: float
    sinkhorn_iters_max: int
    mask_corr_prev: float

    def as_dict(self) -> dict:
        return asdict(self)


METRICS_COLUMNS = tuple(f.name for f in fields(MetricsRow))


@dataclass
class TrainResult:
    metrics: list[MetricsRow]
    params: np.ndarray
    sparse_params: np.ndarray
    initial_params: np.ndarray
    masks: list[np.ndarray]
    units: UnitMap
    model: Model
    eval_metric_name: str = field(default="")


def _indicator(mask, d: Optional[int]) -> np.ndarray:
    if isinstance(mask, HardMask):
        ind = np.asarray(mask.indicator, dtype=np.float64)
        if d is not None and ind.size != d:
            raise ValueError(f"mask has length {ind.size}, expected {d}")
        return ind
    idx = np.asarray(mask, dtype=np.int64).reshape(-1)
    if d is None:
        raise ValueError("d is required for index-list masks")
    if idx.size and (idx.min() < 0 or idx.max() >= d):
        raise ValueError("support index out of range")
    ind = np.zeros(d)
    ind[idx] = 1.0
    return ind


def mask_pearson(mask_a, mask_b, d: Optional[int] = None) -> float:
    """Pearson correlation of two 0/1 support indicators.

    Masks are ``HardMask`` objects or support index lists. Computed from
    integer counts, so identical masks give exactly 1.0.
    """
    a, b = _indicator(mask_a, d), _indicator(mask_b, d)
    if a.size != b.size:
        raise ValueError(f"masks have different lengths {a.size} and {b.size}")
    n = a.size
    na, nb = int(a.sum()), int(b.sum())
    if na in (0, n) or nb in (0, n):
        raise UndefinedCorrelationError("correlation undefined for an all-zero or all-one mask")
    overlap = int(np.dot(a, b))
    num = n * overlap - na * nb
    return float(num / math.sqrt(na * (n - na) * nb * (n - nb)))


def support_f1(predicted: Sequence[int], truth: Sequence[int]) -> float:
    p, t = set(int(i) for i in predicted), set(int(i) for i in truth)
    if not p and not t:
        return 1.0
    tp = len(p & t)
    return 2.0 * tp / (len(p) + len(t))


def _rule_state(rule: Union[str, UpdateRuleState], sinkhorn: Optional[SinkhornConfig]) -> UpdateRuleState:
    if isinstance(rule, UpdateRuleState):
        return rule
    return UpdateRuleState(rule, sinkhorn=sinkhorn or SinkhornConfig())


def train(
    model: Union[ModelSpec, Model],
    data: Dataset,
    rule: Union[str, UpdateRuleState],
    schedule: TrainingSchedule,
    optimizer: Optional[OptimizerConfig] = None,
    group: Optional[PruningGroupSpec] = None,
    seed: int = 0,
    sinkhorn: Optional[SinkhornConfig] = None,
    on_epoch: Optional[Callable[[MetricsRow, np.ndarray, np.ndarray], None]] = None,
) -> TrainResult:
    """Train ``model`` on ``data`` with a sparsity rule and schedule.

    Budgets are per epoch: ``k = keep_fraction_at(epoch) * total unit cost``
    and ``beta = beta_at(epoch)``. The hard mask is frozen at the first
    fine-tune epoch. At each epoch end the rule's hard support is archived
    and ``on_epoch(row, support, params)`` is called.

    Initialization and batch order come from independent streams spawned
    from ``seed``, so the same arguments give bit-identical results.
    """
    model = model if isinstance(model, Model) else Model(model)
    optimizer = optimizer or OptimizerConfig()
    units = (group or PruningGroupSpec()).build(model.layout)
    if units.n_units == 0:
        raise ValueError("no prunable units in the model")
    state = _rule_state(rule, sinkhorn)
    init_seq, batch_seq = np.random.SeedSequence(seed).spawn(2)
    theta = model.init_params(np.random.default_rng(init_seq))
    initial = theta.copy()
    batch_rng = np.random.default_rng(batch_seq)
    velocity = np.zeros_like(theta)

    n = data.X_train.shape[0]
    n_included = int(np.sum(units.entries_per_unit))
    metrics: list[MetricsRow] = []
    masks: list[np.ndarray] = []
    prev: Optional[HardMask] = None
    forward = theta.copy()

    for epoch in range(schedule.total_epochs):
        keep = schedule.keep_fraction_at(epoch)
        k = keep * units.total_cost
        beta = schedule.beta_at(epoch)
        phase = schedule.phase_at(epoch)
        state.beta = beta
        if phase == FINE_TUNE and state.frozen_mask is None:
            state.frozen_mask = rule_forward(state, theta, k, units)[1]

        loss_sum, iters = 0.0, []
        order = batch_rng.permutation(n)
        for step_no, start in enumerate(range(0, n, optimizer.batch_size)):
            idx = order[start:start + optimizer.batch_size]
            Xb, yb = data.X_train[idx], data.y_train[idx]
            seen = {}

            def grad_fn(params, Xb=Xb, yb=yb, seen=seen):
                seen["loss"], g = model.loss_and_grad(params, Xb, yb)
                return g

            # overflow is detected below and reported as divergence
            with np.errstate(over="ignore", invalid="ignore"):
                step = rule_direction(state, theta, grad_fn, k, units)
                finite = np.isfinite(seen["loss"]) and np.all(np.isfinite(step.direction))
                new_theta = optimizer.apply(theta, step.direction, velocity) if finite else theta
            if not (finite and np.all(np.isfinite(new_theta))):
                raise TrainingDiverged(epoch, step_no, theta.copy(), metrics)
            theta = new_theta
            loss_sum += seen["loss"] * idx.size
            if step.soft is not None:
                iters.append(step.sinkhorn_iterations)

        forward, hard, _ = rule_forward(state, theta, k, units)
        kept_entries = int(np.sum(units.entries_per_unit[hard.support]))
        try:
            corr = mask_pearson(prev, hard) if prev is not None else float("nan")
        except UndefinedCorrelationError:
            corr = float("nan")
        row = MetricsRow(
            epoch=epoch,
            phase=phase,
            keep_fraction=float(keep),
            beta=float(beta),
            train_loss=loss_sum / n,
            eval_metric=model.eval_metric(forward, data.X_eval, data.y_eval) if data.X_eval.shape[0] else float("nan"),
            sparsity=1.0 - kept_entries / n_included,
            support_cost=float(np.sum(units.costs[hard.support])),
            support_size=int(hard.size),
            sinkhorn_iters_mean=float(np.mean(iters)) if iters else 0.0,
            sinkhorn_iters_max=int(max(iters)) if iters else 0,
            mask_corr_prev=corr,
        )
        metrics.append(row)
        masks.append(np.asarray(hard.support, dtype=np.int64))
        prev = hard
        if on_epoch is not None:
            on_epoch(row, masks[-1], theta)

    return TrainResult(metrics, theta, forward, initial, masks, units, model, model.eval_metric_name)
