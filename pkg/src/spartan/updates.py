"""IMP, dual averaging (Top-KAST) and Spartan parameter updates.

Every rule takes a gradient callback ``grad_fn(params) -> dL/dparams`` and
evaluates it only at exactly k-sparse forward parameters. The rules differ
in how that gradient is pulled back onto the dense parameter vector:

* IMP masks it (pruned entries are frozen),
* dual averaging applies it densely (straight-through),
* Spartan pulls it back through the soft top-k mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .masking import UnitMap
from .ot_topk import (
    HardMask,
    SinkhornConfig,
    SoftMaskedParams,
    SoftMaskResult,
    hard_project,
    masked_parameter_gradient,
    soft_mask_parameters,
)

__all__ = [
    "RULES",
    "UpdateRuleState",
    "RuleStep",
    "project_parameters",
    "rule_forward",
    "rule_direction",
    "step_imp",
    "step_dual_averaging",
    "step_spartan",
]

GradFn = Callable[[np.ndarray], np.ndarray]

IMP = "imp"
DUAL_AVERAGING = "dual_averaging"
SPARTAN = "spartan"
RULES = (IMP, DUAL_AVERAGING, SPARTAN)


@dataclass
class UpdateRuleState:
    rule: str = SPARTAN
    beta: float = 1.0
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    frozen_mask: Optional[HardMask] = None
    last_dual: Optional[float] = None

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.rule == SPARTAN and not self.beta >= 0:
            raise ValueError("Spartan requires beta >= 0")


@dataclass
class RuleStep:
    """Raw update direction plus what the rule saw on the way."""

    direction: np.ndarray
    forward_params: np.ndarray
    support: HardMask
    soft: Optional[SoftMaskResult] = None

    @property
    def sinkhorn_iterations(self) -> int:
        return 0 if self.soft is None else self.soft.iterations


def project_parameters(theta: np.ndarray, units: UnitMap, k: float) -> tuple[np.ndarray, HardMask]:
    """Hard top-k projection at the unit level; excluded entries pass through."""
    theta = np.asarray(theta, dtype=np.float64)
    hard = hard_project(units.unit_values(theta), k, units.costs)
    return units.expand_mask(hard.indicator) * theta, hard


def _spartan_config(state: UpdateRuleState) -> SinkhornConfig:
    cfg = state.sinkhorn
    if cfg.init_strategy == "dual_cache" and state.last_dual is not None:
        cfg = cfg.with_dual(state.last_dual)
    return cfg


def rule_forward(
    state: UpdateRuleState, theta: np.ndarray, k: float, units: UnitMap
) -> tuple[np.ndarray, HardMask, Optional[SoftMaskedParams]]:
    """Exactly k-sparse forward parameters the rule would evaluate the loss at."""
    theta = np.asarray(theta, dtype=np.float64)
    if state.frozen_mask is not None:
        return units.expand_mask(state.frozen_mask.indicator) * theta, state.frozen_mask, None
    if state.rule in (IMP, DUAL_AVERAGING):
        forward, hard = project_parameters(theta, units, k)
        return forward, hard, None
    masked = soft_mask_parameters(theta, units, k, state.beta, _spartan_config(state))
    if np.isfinite(masked.result.dual_mu):
        state.last_dual = masked.result.dual_mu
    forward, hard = project_parameters(masked.output, units, k)
    return forward, hard, masked


def rule_direction(state: UpdateRuleState, theta: np.ndarray, grad_fn: GradFn, k: float, units: UnitMap) -> RuleStep:
    """Compute the (un-scaled) update direction for ``state.rule``.

    A frozen mask, when set, overrides the rule: the loss is evaluated on
    the frozen support and pruned entries get zero gradient.
    """
    theta = np.asarray(theta, dtype=np.float64)
    forward, hard, masked = rule_forward(state, theta, k, units)
    g = np.asarray(grad_fn(forward), dtype=np.float64)
    if state.frozen_mask is not None or state.rule == IMP:
        return RuleStep(units.expand_mask(hard.indicator) * g, forward, hard)
    if state.rule == DUAL_AVERAGING:
        return RuleStep(g, forward, hard)
    direction = masked_parameter_gradient(theta, g, masked, units)
    return RuleStep(direction, forward, hard, masked.result)


def step_imp(theta: np.ndarray, grad_fn: GradFn, k: float, eta: float, units: UnitMap) -> np.ndarray:
    step = rule_direction(UpdateRuleState(IMP), theta, grad_fn, k, units)
    return np.asarray(theta, dtype=np.float64) - eta * step.direction


def step_dual_averaging(theta: np.ndarray, grad_fn: GradFn, k: float, eta: float, units: UnitMap) -> np.ndarray:
    step = rule_direction(UpdateRuleState(DUAL_AVERAGING), theta, grad_fn, k, units)
    return np.asarray(theta, dtype=np.float64) - eta * step.direction


def step_spartan(
    theta: np.ndarray,
    grad_fn: GradFn,
    k: float,
    beta: float,
    eta: float,
    units: UnitMap,
    state: Optional[UpdateRuleState] = None,
) -> tuple[np.ndarray, RuleStep]:
    """One Spartan update; returns the new parameters and step diagnostics."""
    if state is None:
        state = UpdateRuleState(SPARTAN, beta=beta)
    else:
        state.beta = float(beta)
    step = rule_direction(state, theta, grad_fn, k, units)
    return np.asarray(theta, dtype=np.float64) - eta * step.direction, step
