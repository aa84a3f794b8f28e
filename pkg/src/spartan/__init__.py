"""Soft top-k masking by regularized optimal transport, and sparse training rules built on it."""

from .data import DatasetSpec, load_dataset
from .masking import ParamLayout, PruningGroupSpec, UnitMap, flop_cost
from .models import Model, ModelSpec
from .ot_topk import (
    HardMask,
    SinkhornConfig,
    SoftMaskResult,
    TopKInstance,
    hard_project,
    lp_topk_oracle,
    masked_parameter_gradient,
    soft_mask_parameters,
    soft_topk_backward,
    soft_topk_forward,
)
from .schedules import TrainingSchedule
from .trainer import MetricsRow, OptimizerConfig, TrainingDiverged, mask_pearson, train
from .updates import UpdateRuleState, step_dual_averaging, step_imp, step_spartan

__version__ = "0.1.0"

__all__ = [
    "DatasetSpec",
    "HardMask",
    "MetricsRow",
    "Model",
    "ModelSpec",
    "OptimizerConfig",
    "ParamLayout",
    "PruningGroupSpec",
    "SinkhornConfig",
    "SoftMaskResult",
    "TopKInstance",
    "TrainingDiverged",
    "TrainingSchedule",
    "UnitMap",
    "UpdateRuleState",
    "flop_cost",
    "hard_project",
    "load_dataset",
    "lp_topk_oracle",
    "mask_pearson",
    "masked_parameter_gradient",
    "soft_mask_parameters",
    "soft_topk_backward",
    "soft_topk_forward",
    "step_dual_averaging",
    "step_imp",
    "step_spartan",
    "train",
]
