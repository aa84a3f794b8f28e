"""Cost-sensitive soft top-k via entropic optimal transport.

The soft mask ``m`` solves the entropy-regularized version of

    maximize v^T m  subject to  0 <= m <= 1,  c^T m = k

and is computed by a two-column Sinkhorn iteration carried out entirely in
the log domain. ``lp_topk_oracle`` solves the unregularized LP exactly and
``hard_project`` gives the binary (cost-aware greedy) projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .masking import UnitMap

__all__ = [
    "InvalidInstanceError",
    "SingularBackwardError",
    "TopKInstance",
    "SinkhornConfig",
    "SoftMaskResult",
    "HardMask",
    "INIT_STRATEGIES",
    "soft_topk_forward",
    "soft_topk_backward",
    "lp_topk_oracle",
    "hard_project",
    "threshold_dual",
    "SoftMaskedParams",
    "soft_mask_parameters",
    "masked_parameter_gradient",
]

INIT_STRATEGIES = ("cold", "dual_cache", "sorted_threshold")

# |k - a2| below this is treated as a degenerate (binary) mask in the backward pass.
SINGULAR_TOL = 1e-12


class InvalidInstanceError(ValueError):
    """Raised for malformed top-k inputs (bad costs, budget out of range, NaNs)."""


class SingularBackwardError(ArithmeticError):
    """Raised when the backward denominator vanishes at a non-binary mask."""


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + exp(x)) without overflow
    return np.logaddexp(0.0, x)


def _logsumexp(a: np.ndarray) -> float:
    amax = float(np.max(a))
    if not math.isfinite(amax):
        return amax
    return amax + math.log(float(np.sum(np.exp(a - amax))))


@dataclass
class TopKInstance:
    """Values, costs, budget and sharpness of one soft top-k problem."""

    values: np.ndarray
    k: float
    beta: float = 1.0
    costs: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise InvalidInstanceError("values must be non-empty")
        c = np.ones_like(v) if self.costs is None else np.asarray(self.costs, dtype=np.float64).reshape(-1)
        if c.shape != v.shape:
            raise InvalidInstanceError(f"costs length {c.size} != values length {v.size}")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(c))):
            raise InvalidInstanceError("values and costs must be finite")
        if np.any(c <= 0):
            raise InvalidInstanceError("costs must be strictly positive")
        k = float(self.k)
        beta = float(self.beta)
        total = float(np.sum(c))
        if not math.isfinite(k) or k <= 0 or k > total * (1 + 1e-12):
            raise InvalidInstanceError(f"budget k={k} outside (0, sum(c)={total}]")
        if not math.isfinite(beta) or beta < 0:
            raise InvalidInstanceError(f"sharpness beta={beta} must be finite and >= 0")
        self.values, self.costs, self.k, self.beta = v, c, min(k, total), beta

    @property
    def total_cost(self) -> float:
        return float(np.sum(self.costs))

    @property
    def uniform_costs(self) -> bool:
        return bool(np.all(self.costs == self.costs[0]))


@dataclass(frozen=True)
class SinkhornConfig:
    """Iteration controls for the soft top-k forward pass.

    ``initial_dual`` seeds mu for the ``cold`` and ``dual_cache`` strategies;
    ``sorted_threshold`` ignores it and derives mu from the hard threshold.
    """

    max_iterations: int = 100
    tolerance: float = 0.01
    init_strategy: str = "sorted_threshold"
    initial_dual: float = 0.0

    def __post_init__(self) -> None:
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}, got {self.init_strategy!r}")

    def with_dual(self, mu: float) -> "SinkhornConfig":
        return SinkhornConfig(self.max_iterations, self.tolerance, self.init_strategy, float(mu))


@dataclass
class SoftMaskResult:
    mask: np.ndarray
    dual_mu: float
    dual_nu: np.ndarray
    iterations: int
    converged: bool
    z: np.ndarray = field(repr=False)


@dataclass
class HardMask:
    """Binary unit selection.

    ``threshold_index`` is the unit that completes the budget when units are
    visited in decreasing value/cost order (``None`` for an empty budget).
    """

    support: np.ndarray
    indicator: np.ndarray
    threshold_index: Optional[int] = None

    @property
    def size(self) -> int:
        return int(self.support.size)

    @classmethod
    def from_support(cls, support: Sequence[int], d: int) -> "HardMask":
        support = np.unique(np.asarray(support, dtype=np.int64))
        if support.size and (support[0] < 0 or support[-1] >= d):
            raise ValueError(f"support indices out of range for d={d}")
        ind = np.zeros(d, dtype=np.float64)
        ind[support] = 1.0
        return cls(support=support, indicator=ind)


def _ratio_order(values: np.ndarray, costs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ratio = values / costs
    # stable sort of -ratio: ties resolved by lower index
    return ratio, np.argsort(-ratio, kind="stable")


def threshold_dual(inst: TopKInstance) -> float:
    """Initial mu placing the soft threshold at the hard top-k boundary.

    The boundary unit ``i_k`` is filled to fraction ``f`` by the LP solution;
    the threshold is put where that unit's sigmoid equals ``f``, clamped to
    the midpoints with its sorted neighbours. For ``f = 1/2`` this is exactly
    ``-beta * v[i_k] / c[i_k]``.
    """
    v, c, k, beta = inst.values, inst.costs, inst.k, inst.beta
    ratio, order = _ratio_order(v, c)
    cum = np.cumsum(c[order])
    j = min(int(np.searchsorted(cum, k * (1 - 1e-12))), v.size - 1)
    ik = order[j]
    t = float(ratio[ik])
    before = float(cum[j] - c[ik])
    f = min(max((k - before) / c[ik], 0.0), 1.0)
    upper = 0.5 * (float(ratio[order[j - 1]]) + t) if j > 0 else math.inf
    lower = 0.5 * (float(ratio[order[j + 1]]) + t) if j + 1 < v.size else -math.inf
    if f >= 1.0:
        if math.isfinite(lower):
            t = lower
    elif f > 0.0 and beta > 0:
        t = min(max(t - math.log(f / (1.0 - f)) / beta, lower), upper)
    return -beta * t


def _log_mass(mu: float, z: np.ndarray, log_c: np.ndarray) -> tuple[float, np.ndarray]:
    # log sum_i c_i sigmoid(z_i + mu), plus softplus(-(z + mu)) for reuse
    sp_neg = _softplus(-(z + mu))
    return _logsumexp(log_c - sp_neg), sp_neg


def _upper_bracket(mu: float, z: np.ndarray, log_c: np.ndarray, log_k: float) -> float:
    """Raise ``mu`` until the sigmoid mass reaches the budget.

    The mu-update is increasing in mu with slope below one, so iterates
    started at or above the fixed point stay there and every mask iterate
    satisfies m <= 1.
    """
    log_s, _ = _log_mass(mu, z, log_c)
    gap = log_k - log_s
    if gap <= 0:
        return mu
    step = gap
    while True:
        trial = mu + step
        if _log_mass(trial, z, log_c)[0] >= log_k:
            return trial
        step *= 2.0


def _closed_form(inst: TopKInstance, z0: float) -> SoftMaskResult:
    # z constant across units: the fixed point is the uniform mask k / sum(c)
    c = inst.costs
    frac = inst.k / inst.total_cost
    mu = math.log(frac) - math.log1p(-frac) - z0
    mask = np.full(c.size, frac)
    nu = np.log(c) - _softplus(np.full(c.size, z0 + mu))
    return SoftMaskResult(mask, mu, nu, 1, True, np.full(c.size, z0))


def soft_topk_forward(inst: TopKInstance, cfg: Optional[SinkhornConfig] = None) -> SoftMaskResult:
    """Sinkhorn forward pass of the cost-sensitive soft top-k operator.

    Iterates ``nu = log c - softplus(z + mu)``, ``mu = log k - LSE(z + nu)``,
    ``m = exp(z + mu + nu - log c)`` until the relative change of ``v^T m``
    drops below the tolerance. Non-convergence is reported through
    ``converged`` rather than raised.
    """
    cfg = cfg or SinkhornConfig()
    v, c, k, beta = inst.values, inst.costs, inst.k, inst.beta
    d = v.size
    z = beta * v / c

    if k >= inst.total_cost:
        # saturated budget: m = 1 is the only feasible point (mu -> +inf)
        return SoftMaskResult(np.ones(d), math.inf, np.full(d, -math.inf), 0, True, z)
    if np.all(z == z[0]):
        return _closed_form(inst, float(z[0]))

    if cfg.init_strategy == "sorted_threshold":
        mu = threshold_dual(inst)
    else:
        mu = float(cfg.initial_dual)
        if not math.isfinite(mu):
            mu = 0.0

    log_c = np.log(c)
    log_k = math.log(k)
    mu = _upper_bracket(mu, z, log_c, log_k)
    m_prev = np.ones(d)
    obj_prev = float(np.sum(v * m_prev))
    m = m_prev
    nu = log_c
    converged = False
    t = 0
    for t in range(1, int(cfg.max_iterations) + 1):
        # z + nu = log c - mu - softplus(-(z + mu)), so LSE(z + nu) = log_mass(mu) - mu
        log_s, sp_neg = _log_mass(mu, z, log_c)
        mu_new = log_k + mu - log_s
        m = np.exp((mu_new - mu) - sp_neg)
        nu = log_c - _softplus(z + mu)
        mu = mu_new
        change = abs(float(np.sum(v * (m - m_prev))))
        if change < cfg.tolerance * abs(obj_prev):
            converged = True
            break
        m_prev = m
        obj_prev = float(np.sum(v * m_prev))
    return SoftMaskResult(m, float(mu), nu, t, converged, z)


def soft_topk_backward(g: np.ndarray, result: SoftMaskResult, inst: TopKInstance) -> np.ndarray:
    """Gradient with respect to the values ``v`` given ``g = dL/dm``.

    Uses the closed form ``beta m(1-m) (g/c - a1/(k - a2))``. When
    ``k - a2`` vanishes the mask is binary and the correction is dropped;
    a vanishing denominator at a non-binary mask raises.
    """
    g = np.asarray(g, dtype=np.float64).reshape(-1)
    m, c, k, beta = result.mask, inst.costs, inst.k, inst.beta
    if g.shape != m.shape:
        raise ValueError(f"gradient length {g.size} != mask length {m.size}")
    if beta == 0.0:
        return np.zeros_like(m)
    damp = m * (1.0 - m)
    a1 = float(np.sum(g * damp))
    a2 = float(np.sum(c * m * m))
    denom = k - a2
    if abs(denom) < SINGULAR_TOL:
        if np.any(c * np.abs(damp) > SINGULAR_TOL):
            raise SingularBackwardError(f"k - sum(c m^2) = {denom:.3e} at a non-binary mask")
        return beta * damp * (g / c)
    return beta * damp * (g / c - a1 / denom)


def lp_topk_oracle(inst: TopKInstance) -> np.ndarray:
    """Exact LP optimum by fractional knapsack over value/cost ratios."""
    c, k = inst.costs, inst.k
    _, order = _ratio_order(inst.values, c)
    m = np.zeros(c.size)
    remaining = k
    for i in order:
        if remaining <= 0:
            break
        if c[i] <= remaining:
            m[i] = 1.0
            remaining -= c[i]
        else:
            m[i] = remaining / c[i]
            remaining = 0.0
    return m


def hard_project(values: np.ndarray, k: float, costs: Optional[np.ndarray] = None) -> HardMask:
    """Binary top-k selection of units.

    Uniform costs keep the ``round(k / c)`` highest-valued units. Otherwise
    units are visited by decreasing value/cost and kept whenever their cost
    still fits the remaining budget. Ties go to the lower index.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    d = v.size
    c = np.ones(d) if costs is None else np.asarray(costs, dtype=np.float64).reshape(-1)
    if c.shape != v.shape:
        raise ValueError(f"costs length {c.size} != values length {d}")
    k = float(k)
    ratio, order = _ratio_order(v, c)
    total = float(np.sum(c))
    if k <= 0 or d == 0:
        return HardMask(np.zeros(0, dtype=np.int64), np.zeros(d), None)
    cum = np.cumsum(c[order])
    j = min(int(np.searchsorted(cum, k * (1 - 1e-12))), d - 1)
    threshold_index = int(order[j])
    if k >= total:
        return HardMask(np.arange(d, dtype=np.int64), np.ones(d), threshold_index)

    if np.all(c == c[0]):
        n = min(int(math.floor(k / c[0] + 0.5)), d)
        chosen = order[:n]
    else:
        slack = 1e-12 * k
        n_prefix = int(np.searchsorted(cum, k + slack, side="right"))
        chosen_list = list(order[:n_prefix])
        remaining = k - (float(cum[n_prefix - 1]) if n_prefix else 0.0)
        rest = order[n_prefix:]
        if rest.size:
            min_rest = float(np.min(c[rest]))
            for i in rest:
                if remaining + slack < min_rest:
                    break
                if c[i] <= remaining + slack:
                    chosen_list.append(int(i))
                    remaining -= c[i]
        chosen = np.asarray(chosen_list, dtype=np.int64)
    support = np.sort(chosen).astype(np.int64)
    ind = np.zeros(d)
    ind[support] = 1.0
    return HardMask(support, ind, threshold_index)


class SoftMaskedParams(NamedTuple):
    output: np.ndarray
    result: SoftMaskResult
    instance: TopKInstance
    entry_mask: np.ndarray


def soft_mask_parameters(
    theta: np.ndarray,
    units: UnitMap,
    k: float,
    beta: float,
    cfg: Optional[SinkhornConfig] = None,
) -> SoftMaskedParams:
    """Soft magnitude pruning: ``theta * expand(softtopk(unit_values(theta)))``."""
    theta = np.asarray(theta, dtype=np.float64)
    inst = TopKInstance(units.unit_values(theta), k, beta, units.costs)
    result = soft_topk_forward(inst, cfg)
    entry_mask = units.expand_mask(result.mask)
    return SoftMaskedParams(theta * entry_mask, result, inst, entry_mask)


def masked_parameter_gradient(theta: np.ndarray, g_out: np.ndarray, masked: SoftMaskedParams, units: UnitMap) -> np.ndarray:
    """Chain rule through ``y = theta * m(u(theta))``.

    ``u`` is the unit valuation ``c^p * sum |theta|``; sign(0) is taken as 0.
    """
    theta = np.asarray(theta, dtype=np.float64)
    g_out = np.asarray(g_out, dtype=np.float64)
    direct = masked.entry_mask * g_out
    g_mask = units.collapse(theta * g_out)
    g_values = soft_topk_backward(g_mask, masked.result, masked.instance)
    scale = g_values * units.value_scale
    return direct + np.sign(theta) * units.expand(scale)
